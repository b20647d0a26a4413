"""
Модуль выборки батчей

Чтение манифеста датасета и построение PK-батчей: P личностей по K
изображений в каждом.
"""

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import ConfigurationError, ManifestError


MANIFEST_HEADER = ('path', 'pid', 'camid', 'split')
SPLITS = ('train', 'query', 'gallery')
JUNK_PID = -1

# Имена Market-1501: 0002_c1s1_000451_03.jpg, -1_c3s2_000000_00.jpg
MARKET_NAME_PATTERN = re.compile(r'^(-?\d+)_c(\d+)')


@dataclass(frozen=True)
class ManifestRecord:
    """
    Запись манифеста

    Attributes:
        path: Путь к изображению (как в файле)
        pid: Личность (-1 - мусор/отвлекающее изображение)
        camid: Камера
        split: train, query или gallery
    """
    path: str
    pid: int
    camid: int
    split: str


def parse_market_name(name: str) -> Tuple[int, int]:
    """
    Извлекает (pid, camid) из имени файла Market-1501

    Args:
        name: Имя или путь файла

    Returns:
        (pid, camid)
    """
    match = MARKET_NAME_PATTERN.match(Path(name).name)
    if not match:
        raise ValueError(f"имя {name!r} не соответствует схеме pid_c<камера>")
    return int(match.group(1)), int(match.group(2))


@dataclass
class DatasetManifest:
    """
    Манифест датасета

    Attributes:
        records: Записи в порядке файла
        base_dir: Каталог, относительно которого заданы пути
    """
    records: List[ManifestRecord] = field(default_factory=list)
    base_dir: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> ManifestRecord:
        return self.records[index]

    def indices(self, split: Optional[str] = None) -> List[int]:
        return [i for i, r in enumerate(self.records) if split is None or r.split == split]

    def subset(self, split: str) -> 'DatasetManifest':
        return DatasetManifest([r for r in self.records if r.split == split], self.base_dir)

    def pids(self, split: Optional[str] = None) -> np.ndarray:
        return np.array([self.records[i].pid for i in self.indices(split)], dtype=np.int64)

    def camids(self, split: Optional[str] = None) -> np.ndarray:
        return np.array([self.records[i].camid for i in self.indices(split)], dtype=np.int64)

    def identity_index(self, split: str = 'train') -> Dict[int, List[int]]:
        """Индексы записей по личностям (мусорные pid не входят)"""
        index: Dict[int, List[int]] = {}
        for i in self.indices(split):
            pid = self.records[i].pid
            if pid >= 0:
                index.setdefault(pid, []).append(i)
        return index

    def resolve(self, record: ManifestRecord) -> Path:
        path = Path(record.path)
        return path if path.is_absolute() else self.base_dir / path

    def write(self, path: Union[str, Path]):
        """Сохраняет манифест в CSV с заголовком path,pid,camid,split"""
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(MANIFEST_HEADER)
            for r in self.records:
                writer.writerow((r.path, r.pid, r.camid, r.split))


def _parse_id(value: str, column: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ManifestError(f"{column} не целое число: {value!r}", line) from None


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    """
    Читает и проверяет манифест

    Пустые pid и camid извлекаются из имени файла по схеме Market-1501.

    Args:
        path: Путь к CSV

    Returns:
        Проверенный манифест
    """
    path = Path(path)
    try:
        f = open(path, encoding='utf-8', newline='')
    except OSError as e:
        raise ManifestError(f"не удалось открыть {path}: {e}") from e

    records: List[ManifestRecord] = []
    seen: Dict[str, int] = {}
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise ManifestError(f"ожидается заголовок {','.join(MANIFEST_HEADER)}, получено {header}", 1)

        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestError(f"ожидается {len(MANIFEST_HEADER)} поля, получено {len(row)}", line)
            image_path, pid_text, camid_text, split = (value.strip() for value in row)

            if not image_path:
                raise ManifestError("пустой путь", line)
            if split not in SPLITS:
                raise ManifestError(f"неизвестная часть {split!r}", line)

            if not pid_text or not camid_text:
                try:
                    parsed_pid, parsed_camid = parse_market_name(image_path)
                except ValueError as e:
                    raise ManifestError(str(e), line) from e
                pid = _parse_id(pid_text, 'pid', line) if pid_text else parsed_pid
                camid = _parse_id(camid_text, 'camid', line) if camid_text else parsed_camid
            else:
                pid = _parse_id(pid_text, 'pid', line)
                camid = _parse_id(camid_text, 'camid', line)

            if pid < 0 and not (pid == JUNK_PID and split != 'train'):
                raise ManifestError(f"недопустимый pid {pid} в части {split}", line)
            if camid < 0:
                raise ManifestError(f"отрицательный camid {camid}", line)
            if image_path in seen:
                raise ManifestError(f"путь {image_path} повторяет строку {seen[image_path]}", line)
            seen[image_path] = line
            records.append(ManifestRecord(image_path, pid, camid, split))

    return DatasetManifest(records=records, base_dir=path.parent)


@dataclass(frozen=True)
class BatchSpec:
    """
    PK-батч

    Attributes:
        indices: Индексы записей, по K подряд на личность
        pids: Личности по позициям батча
        num_ids: P
        per_id: K
        epoch: Номер эпохи
        index: Номер батча в эпохе
    """
    indices: Tuple[int, ...]
    pids: Tuple[int, ...]
    num_ids: int
    per_id: int
    epoch: int = 0
    index: int = 0

    def __post_init__(self):
        size = self.num_ids * self.per_id
        if len(self.indices) != size or len(self.pids) != size:
            raise ValueError(f"батч из {len(self.indices)} позиций вместо {size}")
        counts: Dict[int, int] = {}
        for pid in self.pids:
            counts[pid] = counts.get(pid, 0) + 1
        if len(counts) != self.num_ids or any(c != self.per_id for c in counts.values()):
            raise ValueError(f"в батче не ровно {self.num_ids} личностей по {self.per_id}: {counts}")

    def __len__(self) -> int:
        return len(self.indices)


class PKSampler:
    """
    Генератор PK-батчей

    Эпоха - один проход по перемешанным личностям, ⌈N/P⌉ батчей; неполная
    последняя группа дополняется уже использованными личностями.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        num_ids: int = 8,
        per_id: int = 12,
        seed: int = 0,
        split: str = 'train',
        logger: Optional[logging.Logger] = None
    ):
        """
        Инициализация генератора

        Args:
            manifest: Манифест
            num_ids: P, личностей в батче
            per_id: K, изображений на личность
            seed: Зерно
            split: Часть манифеста
            logger: Логгер для записи операций
        """
        if num_ids < 2:
            raise ConfigurationError(f"P должно быть ≥ 2, получено {num_ids}", 'P')
        if per_id < 2:
            raise ConfigurationError(f"K должно быть ≥ 2, получено {per_id}", 'K')

        self.num_ids = num_ids
        self.per_id = per_id
        self.seed = seed
        self.logger = logger

        self._identities = manifest.identity_index(split)
        self._pids = sorted(self._identities)
        if len(self._pids) < num_ids:
            raise ConfigurationError(
                f"в части {split} {len(self._pids)} личностей, нужно не меньше P={num_ids}", 'P'
            )

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(len(self._pids) / self.num_ids)

    def _draw_images(self, pid: int, rng: np.random.Generator) -> List[int]:
        """K индексов личности: без повторов, либо полные копии + остаток"""
        images = np.asarray(self._identities[pid])
        if len(images) >= self.per_id:
            chosen = rng.choice(images, size=self.per_id, replace=False)
        else:
            copies, remainder = divmod(self.per_id, len(images))
            chosen = np.concatenate([np.tile(images, copies), rng.choice(images, size=remainder, replace=False)])
            rng.shuffle(chosen)
        return [int(i) for i in chosen]

    def epoch(self, epoch: int) -> List[BatchSpec]:
        """
        Батчи одной эпохи

        Args:
            epoch: Номер эпохи

        Returns:
            Список батчей
        """
        rng = np.random.default_rng([self.seed, epoch])
        order = [int(pid) for pid in rng.permutation(self._pids)]

        batches = []
        for b in range(self.batches_per_epoch):
            group = order[b * self.num_ids:(b + 1) * self.num_ids]
            if len(group) < self.num_ids:
                used = [pid for pid in order if pid not in group]
                extra = rng.choice(used, size=self.num_ids - len(group), replace=False)
                group = group + [int(pid) for pid in extra]

            indices: List[int] = []
            pids: List[int] = []
            for pid in group:
                indices.extend(self._draw_images(pid, rng))
                pids.extend([pid] * self.per_id)
            batches.append(BatchSpec(tuple(indices), tuple(pids), self.num_ids, self.per_id, epoch, b))

        if self.logger:
            self.logger.debug(f"Эпоха {epoch}: {len(batches)} батчей")
        return batches

    def __iter__(self) -> Iterator[BatchSpec]:
        epoch = 0
        while True:
            yield from self.epoch(epoch)
            epoch += 1


def pk_batches(
    manifest: DatasetManifest,
    num_ids: int = 8,
    per_id: int = 12,
    seed: int = 0,
    epochs: int = 1,
    split: str = 'train'
) -> List[BatchSpec]:
    """
    Детерминированная последовательность PK-батчей

    Args:
        manifest: Манифест
        num_ids: P
        per_id: K
        seed: Зерно
        epochs: Число эпох
        split: Часть манифеста

    Returns:
        Батчи всех эпох по порядку
    """
    sampler = PKSampler(manifest, num_ids, per_id, seed, split)
    batches: List[BatchSpec] = []
    for epoch in range(epochs):
        batches.extend(sampler.epoch(epoch))
    return batches


def describe_batches(batches: Sequence[BatchSpec]) -> List[str]:
    """Строки состава батчей для вывода"""
    lines = []
    for batch in batches:
        unique = sorted(set(batch.pids))
        lines.append(
            f"epoch={batch.epoch} batch={batch.index} size={len(batch)} "
            f"pids={','.join(str(p) for p in unique)} indices={','.join(str(i) for i in batch.indices)}"
        )
    return lines

"""
Демонстрационное обучение

Синтетический датасет -> замороженный stem -> обучение слияния и голов
полной целевой функцией (FIDI + CE + семантика, веса DWA, PK-батчи)
простым градиентным спуском -> оценка на отложенной части.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from autodiff import Tape, backward
from config.run_config import TrainDemoConfig
from config.settings import settings
from evaluation.retrieval import EmbeddingSet, RankingReport, cmc_map, distance_matrix, l2_normalize
from model.fusion import fusion_forward
from model.identity_head import identity_head_from_params
from utils.embedding_io import write_embeddings
from utils.errors import DivergenceError
from utils.logger import close_logger, create_metrics_logger, format_kv

from .losses import FidiConfig
from .objective import ObjectiveConfig, VisNetParams, compute_losses
from .sampling import DatasetManifest, PKSampler
from .schedule import DynamicWeightAveraging, append_weight_row, total_loss
from .synthetic import FrozenStem, SyntheticConfig, SyntheticDataset, generate_dataset


EVAL_BATCH = 64


@dataclass
class StepRecord:
    """
    Итог шага обучения

    Attributes:
        step: Номер шага (с единицы)
        total: Общая потеря
        losses: (fidi, ce, semantic)
        weights: Веса DWA, использованные на шаге
        attention: Средние веса масштабов по батчу
        attention_range: (min, max) весов масштабов по батчу
    """
    step: int
    total: float
    losses: Tuple[float, float, float]
    weights: Tuple[float, float, float]
    attention: Tuple[float, ...]
    attention_range: Tuple[float, float]


@dataclass
class TrainResult:
    """
    Итог обучения

    Attributes:
        history: Записи шагов
        report: Отчет поиска на отложенной части
        output_dir: Каталог результатов
    """
    history: List[StepRecord] = field(default_factory=list)
    report: Optional[RankingReport] = None
    output_dir: Optional[Path] = None

    def total_at(self, step: int) -> float:
        return self.history[step - 1].total


class DemoTrainer:
    """
    Демонстрационное обучение на синтетических данных
    """

    def __init__(self, config: TrainDemoConfig, logger: Optional[logging.Logger] = None):
        """
        Инициализация обучения

        Args:
            config: Проверенные настройки
            logger: Логгер для записи операций
        """
        self.config = config
        self.logger = logger
        self.output_dir = Path(config.output_dir)

        self.dataset: Optional[SyntheticDataset] = None
        self.stem = FrozenStem(config.stem_channels, config.stem_strides, seed=config.seed)
        self.params: Optional[VisNetParams] = None
        self.objective = ObjectiveConfig(
            label_smoothing=config.label_smoothing,
            fidi=FidiConfig(alpha=config.alpha, scale=config.fidi_scale, margin=config.fidi_margin),
        )
        self.dwa = DynamicWeightAveraging(
            window=config.dwa_window,
            temperature=config.dwa_temperature,
            ratio_mode=config.ratio_mode,
            logger=logger,
        )
        self._class_of: Dict[int, int] = {}

    def prepare(self):
        """Генерирует данные и инициализирует параметры"""
        cfg = self.config
        self.dataset = generate_dataset(SyntheticConfig(
            num_ids=cfg.num_ids,
            train_per_id=cfg.train_per_id,
            query_per_id=cfg.query_per_id,
            gallery_per_id=cfg.gallery_per_id,
            height=cfg.height,
            width=cfg.width,
            seed=cfg.seed,
        ))
        train_pids = sorted(set(int(p) for p in self.dataset.manifest.pids('train')))
        self._class_of = {pid: index for index, pid in enumerate(train_pids)}

        rng = np.random.default_rng([cfg.seed, 1])
        self.params = VisNetParams.initialize(
            rng,
            stage_channels=cfg.stem_channels,
            dim=cfg.dim,
            attention_hidden=cfg.attention_hidden,
            num_classes=len(train_pids),
            semantic_hidden=cfg.semantic_hidden,
            dropout=cfg.dropout,
        )
        if self.logger:
            self.logger.info(
                f"Датасет: {len(self.dataset)} изображений, {len(train_pids)} личностей; "
                f"параметров: {sum(t.size for t in self.params.named_parameters().values())}"
            )

    def _sgd_step(self):
        lr = self.config.learning_rate
        for tensor in self.params.named_parameters().values():
            if tensor.grad is not None:
                tensor.data -= lr * tensor.grad
            tensor.zero_grad()

    def train(self, metrics: logging.Logger, weights_log: logging.Logger) -> List[StepRecord]:
        """
        Цикл обучения

        Args:
            metrics: Логгер строк метрик
            weights_log: Логгер траектории весов DWA

        Returns:
            Записи шагов
        """
        cfg = self.config
        sampler = PKSampler(self.dataset.manifest, cfg.num_ids_per_batch, cfg.per_id_in_batch, seed=cfg.seed)
        batches = iter(sampler)
        dropout_rng = np.random.default_rng([cfg.seed, 2])

        history: List[StepRecord] = []
        for step in range(1, cfg.steps + 1):
            batch = next(batches)
            pyramid = self.stem(self.dataset.images[np.asarray(batch.indices)])
            targets = [self._class_of[pid] for pid in batch.pids]
            weights = self.dwa.weights

            with Tape() as tape:
                out = compute_losses(self.params, pyramid, targets, batch.pids,
                                     self.objective, 'train', dropout_rng)
                total = total_loss(out.losses, weights)

            values = out.loss_values()
            if not all(math.isfinite(v) for v in (*values, total.item())):
                raise DivergenceError(f"неконечная потеря на шаге {step}: {values}", last_good_step=step - 1)

            backward(tape, total)
            self._sgd_step()
            self.dwa.update(values)

            attention = out.fusion.weights.as_array()
            record = StepRecord(
                step=step,
                total=total.item(),
                losses=values,
                weights=weights,
                attention=tuple(float(a) for a in attention.mean(axis=0)),
                attention_range=(float(attention.min()), float(attention.max())),
            )
            history.append(record)

            metrics.info(format_kv(
                step=step,
                total=record.total,
                fidi=values[0],
                ce=values[1],
                semantic=values[2],
                w_fidi=weights[0],
                w_ce=weights[1],
                w_semantic=weights[2],
                **{f"attn{i + 1}": a for i, a in enumerate(record.attention)},
                attn_min=record.attention_range[0],
                attn_max=record.attention_range[1],
            ))
            append_weight_row(weights_log, step, weights)

            if self.logger and (step % cfg.log_every == 0 or step == 1):
                self.logger.info(
                    f"Шаг {step}: total={record.total:.4f} fidi={values[0]:.4f} "
                    f"ce={values[1]:.4f} semantic={values[2]:.4f}"
                )
        return history

    def embed(self, indices: List[int]) -> np.ndarray:
        """
        Эмбеддинги BN-neck в режиме eval

        Args:
            indices: Индексы изображений датасета

        Returns:
            Матрица [N, D]
        """
        chunks = []
        for start in range(0, len(indices), EVAL_BATCH):
            chunk = np.asarray(indices[start:start + EVAL_BATCH])
            pyramid = self.stem(self.dataset.images[chunk])
            fusion = fusion_forward(pyramid, self.params.fusion, 'eval')
            embedding, _ = identity_head_from_params(fusion.fused, self.params.identity, 'eval')
            chunks.append(embedding.data)
        return np.concatenate(chunks, axis=0)

    def evaluate(self) -> RankingReport:
        """
        Оценка на отложенной части и запись файлов результатов

        Returns:
            Отчет поиска
        """
        manifest = self.dataset.manifest
        query_idx = manifest.indices('query')
        gallery_idx = manifest.indices('gallery')

        # Оценка по тем же float32, что записаны в VNEB
        query = self.embed(query_idx).astype(np.float32)
        gallery = self.embed(gallery_idx).astype(np.float32)
        write_embeddings(self.output_dir / 'query.vneb', query)
        write_embeddings(self.output_dir / 'gallery.vneb', gallery)

        heldout = DatasetManifest([manifest[i] for i in query_idx + gallery_idx])
        heldout.write(self.output_dir / 'heldout_manifest.csv')

        q_set = l2_normalize(EmbeddingSet.from_arrays(query, manifest.pids('query'), manifest.camids('query')))
        g_set = l2_normalize(EmbeddingSet.from_arrays(gallery, manifest.pids('gallery'), manifest.camids('gallery')))
        report = cmc_map(distance_matrix(q_set, g_set), q_set.meta, g_set.meta,
                         workers=self.config.eval_workers, logger=self.logger)

        (self.output_dir / 'ranking.txt').write_text(
            report.format_table() + '\n' + '\n'.join(report.format_rows()) + '\n', encoding='utf-8'
        )
        return report

    def run(self) -> TrainResult:
        """
        Полный прогон: данные, обучение, оценка

        Returns:
            История и отчет
        """
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.prepare()

        metrics = create_metrics_logger("visnet.metrics", self.output_dir / settings.metrics_log_name)
        weights_log = create_metrics_logger("visnet.dwa", self.output_dir / settings.weights_log_name)
        try:
            history = self.train(metrics, weights_log)
        finally:
            close_logger(metrics)
            close_logger(weights_log)

        report = self.evaluate()
        if self.logger:
            self.logger.info(f"Отложенная часть: rank1={report.rank(1):.4f} mAP={report.mAP:.4f}")
        return TrainResult(history=history, report=report, output_dir=self.output_dir)

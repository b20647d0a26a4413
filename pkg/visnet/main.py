"""
Главный модуль VisNet

Командная строка: подсчет параметров, проверка градиентов,
демонстрационное обучение, оценка поиска, аугментация фона, цепочки
преобразований изображений и вывод состава PK-батчей.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

# Импорты конфигурации
from config import RunConfig, default_arch_spec, load_arch_spec, load_run_config, settings

# Импорты утилит
from utils import (
    EXIT_CHECK_FAILED,
    EXIT_INPUT_ERROR,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    DimensionError,
    EmbeddingFormatError,
    VisNetError,
    augmented_path_for,
    find_images,
    find_mask_pairs,
    load_image,
    load_mask,
    read_embeddings,
    save_image,
    setup_logger,
    transformed_path_for,
)

# Импорты предметной части
from augmentation import (
    CATEGORIES,
    AugmentConfig,
    EvalTransforms,
    MaskedImage,
    TrainTransforms,
    TransformSettings,
    augment_pipeline,
    denormalize,
)
from evaluation import EmbeddingSet, cmc_map, distance_matrix, l2_normalize, write_ap_file
from model import count_parameters
from training import DemoTrainer, describe_batches, load_manifest, pk_batches, run_grad_check
from training.synthetic import SyntheticConfig, generate_dataset


class VisNetLab:
    """
    Главный класс приложения

    Выполняет команды CLI и переводит ошибки в коды выхода.
    """

    def __init__(self, config: Optional[RunConfig] = None, log_level: int = settings.log_level):
        """
        Инициализация приложения

        Args:
            config: Конфигурация команд
            log_level: Уровень логирования
        """
        self.config = config or RunConfig()
        self.logger = setup_logger('visnet', log_level)

    def run(self, command: str) -> int:
        """
        Выполняет команду

        Args:
            command: Имя команды

        Returns:
            Код выхода
        """
        handlers: Dict[str, Callable[[], int]] = {
            'param-count': self.param_count,
            'grad-check': self.grad_check,
            'train-demo': self.train_demo,
            'eval': self.evaluate,
            'augment': self.augment,
            'sample': self.sample,
            'transform': self.transform,
        }
        try:
            return handlers[command]()
        except VisNetError as e:
            self.logger.error(f"Ошибка команды {command}: {e}")
            return e.exit_code
        except DimensionError as e:
            self.logger.error(f"Несовпадение размерностей в команде {command}: {e}")
            return EXIT_INPUT_ERROR

    # === Команды ===

    def param_count(self) -> int:
        """Таблица параметров по описанию архитектуры"""
        cfg = self.config.get('param_count')
        self.config.validate('param_count')

        spec = load_arch_spec(cfg.spec_path) if cfg.spec_path else default_arch_spec()
        if cfg.dump_spec:
            spec.dump(cfg.dump_spec)
            self.logger.info(f"Описание архитектуры сохранено в {cfg.dump_spec}")

        table = count_parameters(spec)
        print(table.format_table())
        for row in table.format_rows():
            print(row)

        for row in table.rows:
            if row.status == 'DISCREPANCY':
                self.logger.warning(f"Расхождение {row.name}: {row.count:,} против {row.reference:,}")

        if cfg.assert_table3:
            mismatches = table.mismatches()
            if mismatches:
                names = ', '.join(row.name for row in mismatches)
                self.logger.error(f"Не совпали выводимые строки: {names}")
                return EXIT_CHECK_FAILED
            self.logger.info("Выводимые строки совпали с эталоном")
        return EXIT_OK

    def grad_check(self) -> int:
        """Проверка градиентов на игрушечном экземпляре"""
        cfg = self.config.get('grad_check')
        self.config.validate('grad_check')

        report = run_grad_check(cfg, logger=self.logger)
        print(report.format_table())
        if not report.passed(cfg.tolerance):
            self.logger.error(f"Проверка градиентов не пройдена: {report.max_rel_err:.3e} > {cfg.tolerance:g}")
            return EXIT_NUMERICAL_ERROR
        self.logger.info(f"Проверка градиентов пройдена: {report.max_rel_err:.3e}")
        return EXIT_OK

    def train_demo(self) -> int:
        """Демонстрационное обучение на синтетических данных"""
        cfg = self.config.get('train_demo')
        self.config.validate('train_demo')

        result = DemoTrainer(cfg, logger=self.logger).run()
        print(result.report.format_table())
        self.logger.info(f"Результаты записаны в {result.output_dir}")
        return EXIT_OK

    def evaluate(self) -> int:
        """Оценка поиска по файлам эмбеддингов и манифесту"""
        cfg = self.config.get('eval')
        self.config.validate('eval')

        query = read_embeddings(cfg.query)
        gallery = read_embeddings(cfg.gallery)
        if query.shape[1] != gallery.shape[1]:
            raise EmbeddingFormatError(
                f"размерность {gallery.shape[1]} не совпадает с запросами ({query.shape[1]})", cfg.gallery
            )
        manifest = load_manifest(cfg.manifest)
        for name, matrix, path in (('query', query, cfg.query), ('gallery', gallery, cfg.gallery)):
            expected = len(manifest.indices(name))
            if matrix.shape[0] != expected:
                raise EmbeddingFormatError(f"{matrix.shape[0]} строк, в манифесте {expected} записей {name}", path)

        q_set = l2_normalize(EmbeddingSet.from_arrays(query, manifest.pids('query'), manifest.camids('query')))
        g_set = l2_normalize(EmbeddingSet.from_arrays(gallery, manifest.pids('gallery'), manifest.camids('gallery')))
        report = cmc_map(distance_matrix(q_set, g_set), q_set.meta, g_set.meta,
                         workers=cfg.workers, logger=self.logger)

        print(report.format_table())
        for row in report.format_rows():
            print(row)

        ap_file = Path(cfg.ap_file) if cfg.ap_file else Path(cfg.query).with_name('per_query_ap.txt')
        write_ap_file(report, ap_file)
        self.logger.info(f"AP по запросам записаны в {ap_file}")
        return EXIT_OK

    def augment(self) -> int:
        """Аугментация фона всех изображений каталога с масками"""
        cfg = self.config.get('augment')
        self.config.validate('augment')
        params = dict(cfg.params)
        for name in ('probability', 'strength'):
            value = getattr(cfg, name)
            if value is not None:
                params[name] = {category: value for category in CATEGORIES}
        augment_cfg = AugmentConfig.from_dict(params)

        pairs = find_mask_pairs(cfg.input_dir)
        if not pairs:
            self.logger.warning(f"В {cfg.input_dir} нет изображений с масками")
            return EXIT_OK

        written = 0
        for index, (image_path, mask_path) in enumerate(pairs):
            src = MaskedImage(load_image(image_path), load_mask(mask_path))
            for copy in range(cfg.copies):
                # Генератор на изображение и копию: результат не зависит от порядка обработки
                rng = np.random.default_rng([cfg.seed, index, copy])
                output = augment_pipeline(src, augment_cfg, rng, logger=self.logger)
                save_image(output, augmented_path_for(image_path, cfg.output_dir, copy))
                written += 1

        self.logger.info(f"Обработано изображений: {len(pairs)}, записано: {written}")
        return EXIT_OK

    def transform(self) -> int:
        """Цепочка преобразований обучения или оценки для изображений каталога"""
        cfg = self.config.get('transform')
        self.config.validate('transform')
        chain = TransformSettings.from_dict(cfg.params, mean=cfg.mean, std=cfg.std)

        images = find_images(cfg.input_dir)
        if not images:
            self.logger.warning(f"В {cfg.input_dir} нет изображений")
            return EXIT_OK

        written = 0
        if cfg.mode == 'eval':
            evaluate = EvalTransforms(chain)
            for image_path in images:
                tensor = evaluate(load_image(image_path))
                save_image(denormalize(tensor, chain.mean, chain.std), transformed_path_for(image_path, cfg.output_dir))
                print(f"image={image_path.name} shape={'x'.join(str(d) for d in tensor.shape)}")
                written += 1
        else:
            train = TrainTransforms(chain)
            for index, image_path in enumerate(images):
                source = load_image(image_path)
                for copy in range(cfg.copies):
                    rng = np.random.default_rng([cfg.seed, index, copy])
                    result = train(source, rng)
                    save_image(denormalize(result.tensor, chain.mean, chain.std),
                               transformed_path_for(image_path, cfg.output_dir, copy))
                    erased = ','.join(str(v) for v in result.erased) if result.erased else 'none'
                    print(f"image={image_path.name} copy={copy} crop={result.crop_offset[0]},{result.crop_offset[1]} "
                          f"flipped={int(result.flipped)} erased={erased}")
                    written += 1

        self.logger.info(f"Обработано изображений: {len(images)}, записано: {written}")
        return EXIT_OK

    def sample(self) -> int:
        """Вывод состава PK-батчей"""
        cfg = self.config.get('sample')
        self.config.validate('sample')

        if cfg.manifest:
            manifest = load_manifest(cfg.manifest)
        else:
            manifest = generate_dataset(SyntheticConfig(seed=cfg.seed)).manifest

        batches = pk_batches(manifest, cfg.num_ids_per_batch, cfg.per_id_in_batch,
                             seed=cfg.seed, epochs=cfg.epochs, split=cfg.split)
        for line in describe_batches(batches):
            print(line)
        self.logger.info(f"Батчей: {len(batches)}")
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Разбор аргументов командной строки"""
    parser = argparse.ArgumentParser(prog='visnet', description='Механизмы VisNet: проверка и демонстрация')
    parser.add_argument('--config', help='JSON-конфигурация команд')
    parser.add_argument('--verbose', action='store_true', help='Подробный журнал')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('param-count', help='Таблица параметров')
    p.add_argument('--spec', dest='spec_path', help='JSON-описание архитектуры')
    p.add_argument('--assert-table3', action='store_true', default=None,
                   help='Ошибка при расхождении выводимых строк с эталоном')
    p.add_argument('--dump-spec', help='Сохранить встроенное описание')

    p = commands.add_parser('grad-check', help='Проверка градиентов')
    p.add_argument('--seed', type=int)
    p.add_argument('--step', type=float)
    p.add_argument('--tolerance', type=float)
    p.add_argument('--corrupt-gradient', action='store_true', default=None,
                   help='Испортить аналитический градиент (отрицательный контроль)')

    p = commands.add_parser('train-demo', help='Демонстрационное обучение')
    p.add_argument('--seed', type=int)
    p.add_argument('--steps', type=int)
    p.add_argument('--output-dir')
    p.add_argument('--learning-rate', type=float)
    p.add_argument('--ratio-mode', choices=('window', 'step'))
    p.add_argument('--eval-workers', type=int)

    p = commands.add_parser('eval', help='Оценка поиска')
    p.add_argument('--query')
    p.add_argument('--gallery')
    p.add_argument('--manifest')
    p.add_argument('--ap-file')
    p.add_argument('--workers', type=int)

    p = commands.add_parser('augment', help='Аугментация фона')
    p.add_argument('--input-dir')
    p.add_argument('--output-dir')
    p.add_argument('--copies', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--probability', type=float, help='Вероятность каждой категории')
    p.add_argument('--strength', type=float, help='Сила смешивания λ')

    p = commands.add_parser('sample', help='Состав PK-батчей')
    p.add_argument('--manifest')
    p.add_argument('-P', dest='num_ids_per_batch', type=int)
    p.add_argument('-K', dest='per_id_in_batch', type=int)
    p.add_argument('--seed', type=int)
    p.add_argument('--epochs', type=int)
    p.add_argument('--split', choices=('train', 'query', 'gallery'))

    p = commands.add_parser('transform', help='Цепочка преобразований изображений')
    p.add_argument('--input-dir')
    p.add_argument('--output-dir')
    p.add_argument('--mode', choices=('train', 'eval'), help='train - случайная цепочка, eval - resize и нормализация')
    p.add_argument('--copies', type=int)
    p.add_argument('--seed', type=int)

    return parser


SECTION_OF = {
    'param-count': 'param_count',
    'grad-check': 'grad_check',
    'train-demo': 'train_demo',
    'eval': 'eval',
    'augment': 'augment',
    'sample': 'sample',
    'transform': 'transform',
}

GLOBAL_ARGS = ('command', 'config', 'verbose')


def main(argv: Optional[List[str]] = None) -> int:
    """Главная функция"""
    args = build_parser().parse_args(argv)
    log_level = logging.DEBUG if args.verbose else settings.log_level

    try:
        config = load_run_config(args.config)
        overrides = {k: v for k, v in vars(args).items() if k not in GLOBAL_ARGS}
        config.update(SECTION_OF[args.command], **overrides)
    except VisNetError as e:
        setup_logger('visnet', log_level).error(f"Ошибка конфигурации: {e}")
        return e.exit_code

    return VisNetLab(config, log_level).run(args.command)


if __name__ == "__main__":
    sys.exit(main())

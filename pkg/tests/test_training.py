"""
Unit tests for the loss terms, KL annealing, early stopping, the training loop and grid search.
"""
import math
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from src.datapipe import FrameRecord, SampleSequence, SequenceTensorDataset
from src.errors import ConfigValidationError, NonFiniteLossError
from src.geo import GeoBounds, GeoCoordinate
from src.model import LatentState, ModelConfig, ModelOutput, SpatialTemporalModel, load_checkpoint, parameter_count
from src.training import (
    EarlyStopping,
    LossBreakdown,
    TrainConfig,
    Trainer,
    beta_schedule,
    coord_loss,
    default_anneal_steps,
    expand_space,
    grid_search,
    kl_loss,
    recon_loss,
    total_loss,
    train,
    validation_split,
)

BOUNDS = GeoBounds(32.0, 32.001, -117.0, -116.999)


def synthetic_sequences(n, seq_len=3, size=8, seed=0):
    """Sequences whose frames encode their own position in the first two channels."""
    rng = np.random.default_rng(seed)
    sequences = []
    for s in range(n):
        frames, gmps = [], []
        for t in range(seq_len):
            level_u, level_v = (int(level) for level in rng.integers(13, 243, size=2))
            u, v = level_u / 255.0, level_v / 255.0
            image = rng.integers(0, 40, size=(size, size, 3), dtype=np.uint8)
            image[..., 0] = level_u
            image[..., 1] = level_v
            coord = GeoCoordinate(BOUNDS.lat_min + u * BOUNDS.lat_span, BOUNDS.lon_min + v * BOUNDS.lon_span)
            frames.append(FrameRecord(float(s * 100 + t * 10), image, coord, 0.02))
            gmps.append(np.full((size, size, 3), level_u, dtype=np.uint8))
        sequences.append(SampleSequence.from_frames(frames, np.stack(gmps), BOUNDS))
    return sequences


def reference_kl(mu, logvar):
    return 0.5 * sum(m * m + math.exp(lv) - 1.0 - lv for m, lv in zip(mu, logvar))


class TestLossTerms(unittest.TestCase):
    def test_reconstruction_mean_squared_error(self):
        self.assertAlmostEqual(float(recon_loss(torch.zeros(2, 3, 3, 4, 4), torch.full((2, 3, 3, 4, 4), 0.5))), 0.25)
        self.assertEqual(float(recon_loss(torch.ones(1, 3), torch.ones(1, 3))), 0.0)

    def test_kl_of_standard_normal_is_zero(self):
        self.assertEqual(float(kl_loss(torch.zeros(2, 5, 4), torch.zeros(2, 5, 4))), 0.0)

    def test_kl_unit_mean(self):
        self.assertAlmostEqual(float(kl_loss(torch.ones(1, 1, 1), torch.zeros(1, 1, 1))), 0.5)

    def test_kl_matches_closed_form(self):
        mu, logvar = [0.3, -1.2, 0.7], [0.5, -0.4, 1.1]
        value = kl_loss(torch.tensor([[mu]], dtype=torch.float64), torch.tensor([[logvar]], dtype=torch.float64))
        self.assertAlmostEqual(float(value), reference_kl(mu, logvar), places=10)

    def test_kl_averages_over_batch_and_time(self):
        mu = torch.tensor([[[1.0], [0.0]], [[0.0], [0.0]]])
        self.assertAlmostEqual(float(kl_loss(mu, torch.zeros_like(mu))), 0.125)

    def test_coordinate_distance(self):
        self.assertAlmostEqual(float(coord_loss(torch.zeros(1, 1, 2), torch.tensor([[[3.0, 4.0]]]))), 5.0)

    def test_coordinate_distance_matches_loop(self):
        rng = np.random.default_rng(3)
        pred, truth = rng.normal(size=(4, 6, 2)), rng.normal(size=(4, 6, 2))
        expected = np.mean([[math.hypot(*(pred[b, t] - truth[b, t])) for t in range(6)] for b in range(4)])
        self.assertAlmostEqual(float(coord_loss(torch.from_numpy(pred), torch.from_numpy(truth))), expected, places=10)


class TestBetaSchedule(unittest.TestCase):
    def test_linear_ramp(self):
        self.assertEqual(beta_schedule(0, 100), 0.0)
        self.assertAlmostEqual(beta_schedule(50, 100), 0.5)
        self.assertEqual(beta_schedule(100, 100), 1.0)
        self.assertEqual(beta_schedule(1000, 100), 1.0)

    def test_monotonic(self):
        values = [beta_schedule(s, 37) for s in range(60)]
        self.assertEqual(values, sorted(values))

    def test_no_annealing(self):
        self.assertEqual(beta_schedule(0, 0), 1.0)

    def test_default_anneal_steps(self):
        self.assertEqual(default_anneal_steps(50, 10), 50)
        self.assertEqual(default_anneal_steps(5, 3), 3)


class TestTotalLoss(unittest.TestCase):
    def setUp(self):
        ones = torch.ones(1, 1, 1)
        self.latent = LatentState(mu=ones, logvar=torch.zeros(1, 1, 1), z=ones)
        self.batch = {'gmp': torch.full((1, 1, 3, 2, 2), 0.5), 'coords': torch.tensor([[[3.0, 4.0]]])}

    def test_all_terms(self):
        output = ModelOutput(recon=torch.zeros(1, 1, 3, 2, 2), latent=self.latent, coords=torch.zeros(1, 1, 2))
        losses = total_loss(output, self.batch, beta=0.5)
        self.assertAlmostEqual(float(losses.total), 0.25 + 0.5 * 0.5 + 5.0)
        self.assertEqual(set(losses.as_floats()), {'recon', 'kl', 'coord', 'total'})

    def test_without_reconstruction(self):
        output = ModelOutput(recon=None, latent=self.latent, coords=torch.zeros(1, 1, 2))
        losses = total_loss(output, self.batch, beta=1.0)
        self.assertIsNone(losses.recon)
        self.assertAlmostEqual(float(losses.total), 5.5)
        self.assertNotIn('recon', losses.as_floats())

    def test_zero_beta_ignores_kl(self):
        output = ModelOutput(recon=None, latent=self.latent, coords=torch.tensor([[[3.0, 4.0]]]))
        self.assertEqual(float(total_loss(output, self.batch, beta=0.0).total), 0.0)

    def test_non_finite_loss_raises(self):
        nan = torch.tensor(float('nan'))
        losses = LossBreakdown(kl=torch.tensor(0.0), coord=nan, beta=1.0, total=nan)
        with self.assertRaises(NonFiniteLossError) as ctx:
            losses.check_finite(7)
        self.assertEqual(ctx.exception.step, 7)
        self.assertEqual(ctx.exception.term, 'coord')


class TestEarlyStopping(unittest.TestCase):
    def test_improving_never_stops(self):
        stopper = EarlyStopping(patience=5)
        for epoch in range(1, 51):
            self.assertTrue(stopper(1.0 / epoch, epoch))
        self.assertFalse(stopper.early_stop)
        self.assertEqual(stopper.best_epoch, 50)

    def test_constant_loss_stops_after_patience(self):
        stopper = EarlyStopping(patience=5)
        stopped_at = None
        for epoch in range(1, 51):
            stopper(1.0, epoch)
            if stopper.early_stop:
                stopped_at = epoch
                break
        self.assertEqual(stopped_at, 6)
        self.assertEqual(stopper.best_epoch, 1)

    def test_improvement_resets_counter(self):
        stopper = EarlyStopping(patience=2)
        for epoch, loss in enumerate([1.0, 1.0, 0.5, 0.6, 0.7], start=1):
            stopper(loss, epoch)
        self.assertTrue(stopper.early_stop)
        self.assertEqual(stopper.best_epoch, 3)

    def test_delta_requires_real_improvement(self):
        stopper = EarlyStopping(patience=1, delta=0.1)
        stopper(1.0, 1)
        self.assertFalse(stopper(0.95, 2))
        self.assertTrue(stopper.early_stop)


class TestTrainConfig(unittest.TestCase):
    def test_rejects_bad_values(self):
        with self.assertRaises(ConfigValidationError):
            TrainConfig(val_fraction=1.0)
        with self.assertRaises(ConfigValidationError):
            TrainConfig(learning_rate=0.0)
        with self.assertRaises(ConfigValidationError):
            TrainConfig.from_dict({'momentum': 0.9})

    def test_defaults(self):
        cfg = TrainConfig()
        self.assertEqual((cfg.learning_rate, cfg.batch_size, cfg.patience), (1e-4, 16, 5))


class TestTraining(unittest.TestCase):
    def setUp(self):
        self.sequences = synthetic_sequences(20)
        self.model_config = ModelConfig.from_preset('micro')
        self.train_config = TrainConfig(learning_rate=1e-2, batch_size=4, max_epochs=30, patience=30,
                                        anneal_steps=10, seed=0)
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_validation_split_keeps_both_parts(self):
        val, rest = validation_split(self.sequences, 0.1, seed=0)
        self.assertTrue(val)
        self.assertTrue(rest)
        self.assertEqual(len(val) + len(rest), len(self.sequences))

    def test_coordinate_loss_decreases(self):
        result = train(self.sequences, self.model_config, self.train_config)
        first = result.log[0]['train_coord']
        self.assertLess(min(r['train_coord'] for r in result.log[-5:]), first)
        self.assertAlmostEqual(result.best_val['total'], min(r['val_total'] for r in result.log))

    def test_artifacts_written(self):
        result = train(self.sequences, self.model_config, replace(self.train_config, max_epochs=3),
                       out_dir=self.out, bounds=BOUNDS, frame_interval_s=10.0, config_hash='feed')
        self.assertTrue((self.out / 'train_log.jsonl').exists())
        self.assertTrue((self.out / 'timing.csv').exists())
        lines = (self.out / 'train_log.jsonl').read_text().splitlines()
        self.assertEqual(len(lines), len(result.log))
        self.assertNotIn('wall_time_s', lines[0])
        model, header = load_checkpoint(self.out / 'checkpoint.bin')
        self.assertEqual(header['config_hash'], 'feed')
        self.assertEqual(header['extra']['best_epoch'], result.best_epoch)
        self.assertEqual(header['step'], result.steps)

    def test_rerun_log_is_byte_identical(self):
        cfg = replace(self.train_config, max_epochs=3)
        train(self.sequences, self.model_config, cfg, out_dir=self.out / 'a')
        train(self.sequences, self.model_config, cfg, out_dir=self.out / 'b')
        self.assertEqual((self.out / 'a' / 'train_log.jsonl').read_bytes(),
                         (self.out / 'b' / 'train_log.jsonl').read_bytes())

    def test_without_reconstruction_logs_no_recon_term(self):
        config = replace(self.model_config, reconstruction_enabled=False)
        result = train(self.sequences, config, replace(self.train_config, max_epochs=2))
        self.assertNotIn('train_recon', result.log[0])
        self.assertIn('train_recon', train(self.sequences, self.model_config,
                                           replace(self.train_config, max_epochs=1)).log[0])

    def test_max_steps_caps_training(self):
        result = train(self.sequences, self.model_config, replace(self.train_config, max_steps=3))
        self.assertEqual(result.steps, 3)
        self.assertEqual(len(result.log), 1)

    def test_beta_reaches_one(self):
        result = train(self.sequences, self.model_config, replace(self.train_config, max_epochs=4))
        self.assertEqual(result.log[-1]['beta'], 1.0)

    def test_too_few_sequences(self):
        with self.assertRaises(ValueError):
            train(self.sequences[:1], self.model_config, self.train_config)


class TestGradients(unittest.TestCase):
    """Analytic gradients of the full objective against central differences, in float64."""

    def setUp(self):
        torch.manual_seed(0)
        self.model = SpatialTemporalModel(ModelConfig.from_preset('micro')).double()
        dataset = SequenceTensorDataset(synthetic_sequences(2), dtype=torch.float64)
        self.batch = {key: torch.stack([dataset[i][key] for i in range(2)]) for key in ('fpp', 'gmp', 'coords')}

    def loss(self):
        output = self.model(self.batch['fpp'], generator=torch.Generator().manual_seed(1))
        return total_loss(output, self.batch, beta=0.7).total

    def test_micro_configuration(self):
        config = self.model.config
        self.assertEqual((config.latent_dim, config.d_model, config.seq_len, config.fpp_size), (4, 16, 3, (8, 8)))

    def test_total_loss_gradient_every_parameter(self):
        self.model.zero_grad()
        self.loss().backward()
        step = 1e-4
        errors = []
        with torch.no_grad():
            for name, param in self.model.named_parameters():
                flat, grad = param.view(-1), param.grad.view(-1)
                for i in range(flat.numel()):
                    original = float(flat[i])
                    flat[i] = original + step
                    plus = float(self.loss())
                    flat[i] = original - step
                    minus = float(self.loss())
                    flat[i] = original
                    numeric = (plus - minus) / (2 * step)
                    analytic = float(grad[i])
                    errors.append(abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6))
        errors = np.array(errors)
        self.assertEqual(len(errors), parameter_count(self.model))
        self.assertLess(errors.max(), 1e-2)
        self.assertGreaterEqual(np.mean(errors < 1e-3), 0.99)


OVERFIT_STEPS = 500
OVERFIT_ANNEAL_STEPS = 10 ** 9


class TestOverfit(unittest.TestCase):
    """Eight sequences are memorized while the KL weight is still at the start of its ramp."""

    def setUp(self):
        self.model_config = ModelConfig.from_preset('micro', latent_dim=8)

    def fit(self, seed):
        dataset = SequenceTensorDataset(synthetic_sequences(8, seed=seed))
        batch = {key: torch.stack([dataset[i][key] for i in range(len(dataset))]) for key in ('fpp', 'gmp', 'coords')}
        train_config = TrainConfig(learning_rate=1e-2, batch_size=8, anneal_steps=OVERFIT_ANNEAL_STEPS, seed=seed)
        trainer = Trainer(self.model_config, train_config)
        best = trainer.evaluate(dataset)['coord']
        history = []
        for step in range(OVERFIT_STEPS):
            losses = trainer.train_step(batch, beta_schedule(trainer.step, OVERFIT_ANNEAL_STEPS))
            history.append((losses.beta, float(losses.total)))
            if step % 5 == 4:
                best = min(best, trainer.evaluate(dataset)['coord'])
        return best, history

    def test_coordinates_memorized_for_every_seed(self):
        for seed in (0, 1, 2):
            best, history = self.fit(seed)
            self.assertEqual(len(history), OVERFIT_STEPS)
            self.assertLess(max(beta for beta, _ in history), 1e-6)
            self.assertLess(best, 0.01, f"seed {seed}")

    def test_training_loss_descends(self):
        _, history = self.fit(0)
        self.assertLess(history[-1][1], history[0][1])


class TestValidationLosses(unittest.TestCase):
    class NanCoordinates(SequenceTensorDataset):
        def __getitem__(self, idx):
            item = super().__getitem__(idx)
            if idx == 1:
                item['coords'] = torch.full_like(item['coords'], float('nan'))
            return item

    def setUp(self):
        self.trainer = Trainer(ModelConfig.from_preset('micro'), TrainConfig(batch_size=2, seed=0))

    def test_finite_validation(self):
        values = self.trainer.evaluate(SequenceTensorDataset(synthetic_sequences(4)))
        self.assertTrue(all(math.isfinite(v) for v in values.values()))

    def test_nan_validation_batch_raises(self):
        with self.assertRaises(NonFiniteLossError) as ctx:
            self.trainer.evaluate(self.NanCoordinates(synthetic_sequences(4)))
        self.assertEqual(ctx.exception.term, 'coord')
        self.assertEqual(ctx.exception.step, 0)


def dominated_trial(params, seed, sequences, model_config, train_config, subset_fraction, source_interval_s):
    score = 0.1 if params['learning_rate'] == 3e-4 else 0.5
    return {'val_coord': score + 0.01 * seed, 'val_total': score, 'best_epoch': 1, 'steps': 1, 'subset_size': 2}


class TestGridSearch(unittest.TestCase):
    def setUp(self):
        self.model_config = ModelConfig.from_preset('micro')
        self.train_config = TrainConfig(batch_size=4, max_epochs=1)

    def test_expand_space(self):
        combos = expand_space({'learning_rate': [1e-4, 3e-4], 'latent_dim': [4, 8, 16]})
        self.assertEqual(len(combos), 6)
        self.assertEqual(list(combos[0]), ['latent_dim', 'learning_rate'])

    def test_expand_space_errors(self):
        with self.assertRaises(ValueError):
            expand_space({})
        with self.assertRaises(ValueError):
            expand_space({'learning_rate': []})
        with self.assertRaises(ConfigValidationError):
            expand_space({'warp_factor': [1]})

    def test_one_row_per_seed(self):
        ranked, full = grid_search({'learning_rate': [1e-4]}, [], self.model_config, self.train_config,
                                   seeds=[0, 1, 2, 3, 4], trial_fn=dominated_trial)
        self.assertEqual(len(full), 5)
        self.assertEqual(len(ranked), 1)
        self.assertEqual(int(ranked.iloc[0]['runs']), 5)
        self.assertAlmostEqual(ranked.iloc[0]['mean_val_coord'], 0.52)

    def test_dominating_configuration_ranks_first(self):
        ranked, full = grid_search({'learning_rate': [1e-4, 3e-4], 'latent_dim': [4, 8]}, [],
                                   self.model_config, self.train_config, seeds=[0, 1], trial_fn=dominated_trial)
        self.assertEqual(len(full), 8)
        self.assertEqual(list(ranked['rank']), [1, 2, 3, 4])
        self.assertTrue((ranked.iloc[:2]['learning_rate'] == 3e-4).all())

    def test_no_seeds(self):
        with self.assertRaises(ValueError):
            grid_search({'learning_rate': [1e-4]}, [], self.model_config, self.train_config, seeds=[])

    def test_real_trial(self):
        sequences = synthetic_sequences(24, seed=4)
        ranked, full = grid_search({'latent_dim': [4]}, sequences, self.model_config, self.train_config,
                                   subset_fraction=0.5, seeds=[0])
        self.assertEqual(len(full), 1)
        self.assertTrue(math.isfinite(full.iloc[0]['val_coord']))
        self.assertGreaterEqual(full.iloc[0]['subset_size'], 12)


if __name__ == '__main__':
    unittest.main()

import csv

import numpy as np

from cfconv.export import export_kernels, load_tensor, save_tensor, spectral_centroids
from cfconv.numerics import fft2, radial_frequencies
from cfconv.training import ModelConfig, build_model


class TestTensorDump:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((3, 4, 2))
        path = tmp_path / "t.cftn"
        save_tensor(path, arr)
        assert np.array_equal(load_tensor(path), arr)


class TestCentroids:
    def test_uniform_init_centroids_cluster_at_grid_mean(self):
        # i.i.d. U[-1,1] kernels weight every frequency equally, so each
        # filter's centroid sits near the grid's mean radius: no band bias
        rng = np.random.default_rng(1)
        k = rng.uniform(-1, 1, (16, 16, 4, 4)) + 1j * rng.uniform(-1, 1, (16, 16, 4, 4))
        cents = spectral_centroids(k)
        grid_mean = radial_frequencies(16, 16).mean()
        assert np.abs(cents - grid_mean).max() < 0.1
        assert cents.std() > 0  # distributed, not collapsed

    def test_lowpass_spectrum_has_wide_spatial_support(self):
        # energy confined to low frequencies spreads in the other domain:
        # the spatial equivalent cannot be tightly supported
        from cfconv.numerics import ifft2_real

        r = radial_frequencies(16, 16)
        k = (r <= 0.1).astype(float)
        cents = spectral_centroids(k[:, :, None, None].astype(complex))
        assert cents[0, 0] < 0.1
        spatial = ifft2_real(k.astype(complex), axes=(0, 1))
        energy = spatial ** 2
        inside_3x3 = energy[np.ix_([0, 1, 15], [0, 1, 15])].sum()
        assert inside_3x3 / energy.sum() < 0.9  # support spills well beyond 3x3

    def test_single_bin_centroid_is_its_radius(self):
        k = np.zeros((8, 8), dtype=complex)
        k[2, 3] = 5.0
        cents = spectral_centroids(k[:, :, None, None])
        r = radial_frequencies(8, 8)
        assert abs(cents[0, 0] - r[2, 3]) < 1e-12


class TestExportKernels:
    def test_export_files_and_csv(self, tmp_path):
        config = ModelConfig(layer_count=2, filters_per_layer=2, input_height=6,
                             input_width=6, input_channels=1, selected_positions=4,
                             mlp_widths=(2, 1), seed=3)
        model = build_model(config)
        files = export_kernels(model, tmp_path / "out")
        names = {f.split("/")[-1] for f in files}
        assert "conv0_state_re.cftn" in names
        assert "conv1_spatial.cftn" in names
        with open(tmp_path / "out" / "spectral_centroids.csv") as fh:
            rows = list(csv.DictReader(fh))
        # one row per (layer, c_in, c_out): 1*2 + 2*2
        assert len(rows) == 6
        assert all(0 <= float(r["centroid"]) <= 0.75 for r in rows)

    def test_degenerate_single_position_layer(self, tmp_path):
        config = ModelConfig(layer_count=1, filters_per_layer=1, input_height=1,
                             input_width=1, input_channels=1, selected_positions=1,
                             mlp_widths=(1,), seed=4)
        model = build_model(config)
        files = export_kernels(model, tmp_path / "one")
        spatial = load_tensor(tmp_path / "one" / "conv0_spatial.cftn")
        assert spatial.shape == (1, 1, 1, 1)
        assert len(files) == 4  # three tensors and the csv

import json

import pytest

from meshinpaint.cli import main
from meshinpaint.config import PipelineConfig, build_config, load_config_file
from meshinpaint.meshio import load_mesh, save_mesh
from meshinpaint.shapes import icosphere, punch_hole
from meshinpaint.sparse import load_dictionary


class TestConfig:
    def test_defaults_valid(self):
        cfg = PipelineConfig().validate()
        assert cfg.sigma == 1.5
        assert cfg.sparsity == 4
        assert cfg.m_basis == 16

    def test_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment\n"
            "sigma = 2.5\n"
            "basis = gaussian\n"
            "nlm = off\n"
            "seeds = 40\n"
        )
        overrides = load_config_file(path)
        assert overrides == {"sigma": 2.5, "basis": "gaussian", "nlm": False, "seeds": 40}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("sigma = 1.0\nwavelets = 3\n")
        with pytest.raises(ValueError, match="wavelets"):
            load_config_file(path)

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("sigma = 2.5\nm_basis = 25\n")
        cfg = build_config(file_path=path, sigma=3.0)
        assert cfg.sigma == 3.0
        assert cfg.m_basis == 25

    @pytest.mark.parametrize("field,value", [
        ("sigma", 0.0), ("sparsity", 0), ("mode", "psychic"), ("basis", "fourier"),
        ("fair_order", 3), ("iterations", 0), ("threads", 0), ("h", -1.0),
    ])
    def test_ranges_enforced(self, field, value):
        with pytest.raises(ValueError):
            PipelineConfig(**{field: value}).validate()


@pytest.fixture(scope="module")
def sphere_hole_file(tmp_path_factory):
    base = tmp_path_factory.mktemp("meshes")
    s = icosphere(3)
    save_mesh(s, base / "sphere.off")
    holey, _ = punch_hole(s, s.vertices[0], n_faces=20)
    save_mesh(holey, base / "holey.off")
    return base


class TestCLI:
    def test_info_closed(self, sphere_hole_file, capsys):
        assert main(["info", str(sphere_hole_file / "sphere.off")]) == 0
        out = capsys.readouterr().out
        assert "holes = 0" in out

    def test_info_with_hole(self, sphere_hole_file, capsys):
        assert main(["info", str(sphere_hole_file / "holey.off")]) == 0
        out = capsys.readouterr().out
        assert "holes = 1" in out

    def test_info_non_manifold_exit_4(self, tmp_path, capsys):
        path = tmp_path / "bad.off"
        path.write_text(
            "OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 -1 0\n"
            "3 0 1 2\n3 0 1 3\n3 1 0 4\n"
        )
        assert main(["info", str(path)]) == 4
        assert "non-manifold" in capsys.readouterr().err

    def test_missing_file_exit_2(self, capsys):
        assert main(["info", "/nowhere/missing.off"]) == 2

    def test_train_writes_loadable_dictionary(self, sphere_hole_file, tmp_path, capsys):
        dict_path = tmp_path / "sphere.mdld"
        rc = main(["train", str(sphere_hole_file / "sphere.off"), "-o", str(dict_path),
                   "--atoms", "16", "--iters", "3", "--seed", "0"])
        assert rc == 0
        d = load_dictionary(dict_path)
        assert d.n_atoms == 16
        out = capsys.readouterr().out
        assert "patch_count" in out

    def test_train_report_and_figures(self, sphere_hole_file, tmp_path):
        dict_path = tmp_path / "d.mdld"
        report = tmp_path / "train.json"
        rc = main(["train", str(sphere_hole_file / "sphere.off"), "-o", str(dict_path),
                   "--atoms", "16", "--iters", "3", "--report-json", str(report)])
        assert rc == 0
        data = json.loads(report.read_text())
        assert data["patch_count"] > 0
        assert (tmp_path / "train.residuals.png").exists()
        assert (tmp_path / "train.atoms.png").exists()

    def test_inpaint_watertight_with_reference(self, sphere_hole_file, tmp_path, capsys):
        out_path = tmp_path / "out.off"
        report = tmp_path / "run.json"
        rc = main(["inpaint", str(sphere_hole_file / "holey.off"), "-o", str(out_path),
                   "--atoms", "16", "--iters", "4", "--seed", "0",
                   "--reference", str(sphere_hole_file / "sphere.off"),
                   "--report-json", str(report)])
        assert rc == 0
        mesh = load_mesh(out_path)
        assert mesh.is_closed
        text = capsys.readouterr().out
        assert "reference_rms" in text
        data = json.loads(report.read_text())
        assert data["reference_rms"] < 0.05
        assert (tmp_path / "run.patch_residuals.png").exists()
        assert (tmp_path / "run.deviation.png").exists()
        assert (tmp_path / "run.residuals.png").exists()

    def test_inpaint_with_pretrained_dictionary(self, sphere_hole_file, tmp_path):
        dict_path = tmp_path / "d.mdld"
        main(["train", str(sphere_hole_file / "sphere.off"), "-o", str(dict_path),
              "--atoms", "16", "--iters", "3"])
        out_path = tmp_path / "out.off"
        rc = main(["inpaint", str(sphere_hole_file / "holey.off"), "-o", str(out_path),
                   "--dict", str(dict_path)])
        assert rc == 0
        assert load_mesh(out_path).is_closed

    def test_fill_only_no_dictionary(self, sphere_hole_file, tmp_path, capsys):
        out_path = tmp_path / "filled.off"
        rc = main(["inpaint", str(sphere_hole_file / "holey.off"), "-o", str(out_path),
                   "--fill-only"])
        assert rc == 0
        assert load_mesh(out_path).is_closed
        assert "geometry-only" in capsys.readouterr().out

    def test_fill_holes_subcommand(self, sphere_hole_file, tmp_path):
        out_path = tmp_path / "filled2.off"
        rc = main(["fill-holes", str(sphere_hole_file / "holey.off"), "-o", str(out_path)])
        assert rc == 0
        assert load_mesh(out_path).is_closed

    def test_no_holes_notice(self, sphere_hole_file, tmp_path, capsys):
        out_path = tmp_path / "same.off"
        rc = main(["inpaint", str(sphere_hole_file / "sphere.off"), "-o", str(out_path)])
        assert rc == 0
        assert "no holes" in capsys.readouterr().out

    def test_denoise_runs(self, sphere_hole_file, tmp_path):
        out_path = tmp_path / "den.off"
        rc = main(["denoise", str(sphere_hole_file / "sphere.off"), "-o", str(out_path),
                   "--atoms", "16", "--iters", "3"])
        assert rc == 0
        assert load_mesh(out_path).n_vertices == 642

    def test_direct_mode_large_hole_warns(self, tmp_path, capsys):
        g = icosphere(3)
        ring = {0}
        for _ in range(3):
            grown = set(ring)
            for v in ring:
                grown.update(int(u) for u in g.vertex_neighbors(v))
            ring = grown
        doomed = [i for i, f in enumerate(g.faces) if all(int(v) in ring for v in f)]
        holey, _ = g.delete_faces(doomed)
        mesh_path = tmp_path / "big_hole.off"
        save_mesh(holey, mesh_path)
        out_path = tmp_path / "out.off"
        with pytest.warns(UserWarning, match="adaptive"):
            rc = main(["inpaint", str(mesh_path), "-o", str(out_path),
                       "--mode", "direct", "--atoms", "16", "--iters", "3",
                       "--sigma", "1.0"])
        assert rc in (0, 3)  # either completes or directs the user to adaptive

    def test_config_file_via_flag(self, sphere_hole_file, tmp_path):
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text("iterations = 2\nn_atoms = 16\n")
        out_path = tmp_path / "out.off"
        rc = main(["inpaint", str(sphere_hole_file / "holey.off"), "-o", str(out_path),
                   "--config", str(cfg_path)])
        assert rc == 0

    def test_bad_config_exit_2(self, sphere_hole_file, tmp_path):
        cfg_path = tmp_path / "bad.cfg"
        cfg_path.write_text("no_such_option = 1\n")
        rc = main(["inpaint", str(sphere_hole_file / "holey.off"), "-o", "/tmp/x.off",
                   "--config", str(cfg_path)])
        assert rc == 2

    def test_determinism_byte_identical(self, sphere_hole_file, tmp_path):
        a, b = tmp_path / "a.off", tmp_path / "b.off"
        args = ["inpaint", str(sphere_hole_file / "holey.off"),
                "--atoms", "16", "--iters", "3", "--seed", "11"]
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

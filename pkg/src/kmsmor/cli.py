"""Command line pipeline: generate models, reduce them, verify the reduction.

Subcommands
-----------
generate CONFIG --out DIR      assemble a rod/plate/box model and write
                               matrix files plus manifest
reduce MANIFEST --out DIR      select the modal cutoff from an error budget,
                               build the KMS + bilinear + mechanical bases,
                               project, and write the reduced bundle
verify MANIFEST BUNDLE --out DIR
                               compare full vs reduced FRFs against the
                               error estimator, compare eigenvalues, and
                               check the mechanical chain; exit status
                               reflects the acceptance thresholds

Exit codes: 0 pass, 1 acceptance violation, 2 usage or config error,
3 numerical failure.  The KMSMOR_THREADS environment variable sets the
worker count for frequency sweeps.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import frf, log_grid, relative_error_frf, thermo_mech_frf
from .assembly import assemble_box_3d, assemble_plate_2d, assemble_rod_1d
from .bilinear import DEFAULT_BILINEAR_ITERATIONS, bilinear_extend
from .error_bound import ErrorBudget, bound_check, estimator, select_cutoff
from .errors import ConfigError, KmsmorError, ModelValidationError, NumericalError
from .grids import BOX_FACES, PLATE_SIDES, BoxGrid, PlateGrid
from .mechanical import build_mech_basis, project_mechanical
from .mmio import (atomic_write_text, load_bundle, load_system, save_bundle,
                   save_system, write_csv)
from .modal import compute_modal_basis
from .reduction import (DEFAULT_EXPANSION_POINT, build_krylov_block, combine_kms,
                        project)
from .systems import BoundaryPatch, MaterialConfig, ParameterSample

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

DEFAULT_HTC_PAIRS = ((1.0, 8.0), (4.0, 8.0), (4.0, 1.0), (50.0, 50.0))


def _versions() -> dict:
    import scipy
    return {"kmsmor": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


# ---------------------------------------------------------------- generate

def _require(cfg: dict, field: str, where: str):
    if field not in cfg:
        raise ConfigError(f"{where}: missing field {field!r}")
    return cfg[field]


def _material(cfg: dict) -> MaterialConfig:
    m = _require(cfg, "material", "config")
    try:
        return MaterialConfig(**m)
    except TypeError as exc:
        raise ConfigError(f"material: {exc}") from exc


def _patch_facets(p: dict, geometry: str, grid) -> tuple[int, ...]:
    where = f"patch {p.get('name', '?')!r}"
    if "facets" in p:
        return tuple(int(f) for f in p["facets"])
    if geometry == "rod":
        end = p.get("end")
        n_last = grid  # rod passes num_elements
        if end == "left":
            return (0,)
        if end == "right":
            return (n_last,)
        if end == "both":
            return (0, n_last)
        raise ConfigError(f"{where}: rod patches need 'facets' (node ids) or 'end'")
    if geometry == "plate":
        side = p.get("side")
        if side not in PLATE_SIDES:
            raise ConfigError(f"{where}: plate patches need 'facets' or 'side' in {PLATE_SIDES}")
        return grid.side_facets(side)
    face = p.get("face")
    if face not in BOX_FACES:
        raise ConfigError(f"{where}: box patches need 'facets' or 'face' in {BOX_FACES}")
    return grid.face_facets(face)


def _patch(p: dict, geometry: str, grid) -> BoundaryPatch:
    name = _require(p, "name", "patch")
    kind = p.get("kind", "convective")
    facets = _patch_facets(p, geometry, grid)
    kwargs = {}
    if "weight" in p:
        kwargs["weight_per_facet"] = p["weight"]
    if "directions" in p:
        kwargs["directions"] = tuple(p["directions"])
    if "spring_stiffness" in p:
        kwargs["spring_stiffness"] = p["spring_stiffness"]
    return BoundaryPatch(name=name, facet_ids=facets, kind=kind, **kwargs)


def _node_id(grid: BoxGrid, node, where: str) -> int:
    if isinstance(node, int):
        return node
    if isinstance(node, (list, tuple)) and len(node) == 3:
        return grid.node_id(*[int(q) for q in node])
    raise ConfigError(f"{where}: node must be an id or an [ix, iy, iz] triple")


def _dof_list(grid: BoxGrid, entries, where: str) -> list[tuple[int, str]]:
    out = []
    for e in entries:
        q = _node_id(grid, _require(e, "node", where), where)
        for ax in e.get("directions", ("x", "y", "z")):
            out.append((q, ax))
    return out


def cmd_generate(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    geometry = _require(cfg, "geometry", "config")
    material = _material(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    collocated = cfg.get("collocated_outputs", True)
    output_nodes = cfg.get("output_nodes", ())
    mech = None

    if geometry == "rod":
        ne = int(_require(cfg, "elements", "config"))
        length = float(_require(cfg, "dims", "config"))
        patches = [_patch(p, "rod", ne) for p in cfg.get("patches", [])]
        thermal = assemble_rod_1d(ne, length, material, patches,
                                  cross_section=cfg.get("cross_section", 1.0),
                                  lumped_capacity=cfg.get("lumped_capacity", True),
                                  collocated_outputs=collocated, output_nodes=output_nodes)
    elif geometry == "plate":
        nx, ny = (int(v) for v in _require(cfg, "elements", "config"))
        dims = tuple(float(v) for v in _require(cfg, "dims", "config"))
        grid = PlateGrid(nx, ny, *dims)
        patches = [_patch(p, "plate", grid) for p in cfg.get("patches", [])]
        thermal = assemble_plate_2d(nx, ny, dims, material, patches,
                                    thickness=cfg.get("thickness", 1.0),
                                    lumped_capacity=cfg.get("lumped_capacity", True),
                                    collocated_outputs=collocated, output_nodes=output_nodes)
    elif geometry == "box":
        nx, ny, nz = (int(v) for v in _require(cfg, "elements", "config"))
        dims = tuple(float(v) for v in _require(cfg, "dims", "config"))
        grid = BoxGrid(nx, ny, nz, *dims)
        patches = [_patch(p, "box", grid) for p in cfg.get("patches", [])]
        thermal, mech = assemble_box_3d(
            nx, ny, nz, dims, material, patches,
            lumped_capacity=cfg.get("lumped_capacity", True),
            collocated_outputs=collocated, output_nodes=output_nodes,
            mech_outputs=_dof_list(grid, cfg.get("mech_outputs", []), "mech_outputs"),
            external_forces=_dof_list(grid, cfg.get("external_forces", []), "external_forces"))
    else:
        raise ConfigError(f"config: unknown geometry {geometry!r} (rod, plate or box)")

    manifest = save_system(out, thermal, mech)
    record = {
        "versions": _versions(),
        "geometry": geometry,
        "thermal_dofs": thermal.n,
        "mechanical_dofs": mech.n_mech if mech is not None else None,
        "patches": list(thermal.patch_names),
        "input_labels": list(thermal.input_labels),
    }
    atomic_write_text(out / "generate_report.json",
                      json.dumps(record, indent=2, sort_keys=True) + "\n")
    print(f"wrote {manifest} (thermal n={thermal.n}"
          + (f", mechanical n={mech.n_mech}" if mech is not None else "") + ")")
    return EXIT_PASS


# ---------------------------------------------------------------- reduce

def cmd_reduce(args) -> int:
    stage = "load"
    try:
        thermal, mech = load_system(Path(args.manifest))
        budget = ErrorBudget.from_tolerance(args.epsilon, args.omega_max,
                                            args.expansion_point)
        stage = "modal basis"
        Phi, alphas = compute_modal_basis(thermal, budget.omega_m,
                                          max_modes=args.max_modes)
        stage = "krylov block"
        Vk = build_krylov_block(thermal, budget.s_e)
        stage = "kms combination"
        kms = combine_kms(Phi, Vk, s_e=budget.s_e, omega_m=budget.omega_m,
                          modal_eigenvalues=alphas)
        stage = "bilinear extension"
        basis = bilinear_extend(thermal, kms, args.bilinear_iters)
        stage = "thermal projection"
        reduced = project(thermal, basis)
        reduced_mech = None
        if mech is not None:
            stage = "mechanical basis"
            mech_basis = build_mech_basis(mech, basis)
            stage = "mechanical projection"
            reduced_mech = project_mechanical(mech, mech_basis, basis)
        stage = "bundle write"
        out = Path(args.out)
        provenance = {
            "versions": _versions(),
            "epsilon": budget.epsilon,
            "omega_max": budget.omega_max,
            "s_e": budget.s_e,
            "omega_m": budget.omega_m,
            "n_me": args.bilinear_iters,
            "mu": kms.mu,
            "modal_eigenvalues": [float(a) for a in alphas],
            "r_kms": kms.r,
            "pre_deflation_width": basis.pre_deflation_width,
            "r_parametric": basis.r,
            "thermal_n": thermal.n,
            "mechanical_n": mech.n_mech if mech is not None else None,
            "r_mechanical": reduced_mech.r if reduced_mech is not None else None,
            "tolerances": {"orthonormality": 1e-10, "drop": 1e-10,
                           "eigen_residual_rtol": 1e-8},
        }
        save_bundle(out, reduced, reduced_mech, provenance)
    except KmsmorError as exc:
        print(f"reduce failed at stage {stage!r}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc, NumericalError) else EXIT_CONFIG
    print(f"omega_m = {budget.omega_m:.6g} rad/s for epsilon={budget.epsilon:g}, "
          f"omega_max={budget.omega_max:g}")
    print(f"mu = {kms.mu} modal + {kms.r - kms.mu} krylov columns; "
          f"bilinear width {basis.pre_deflation_width} pre-deflation -> {basis.r}")
    if reduced_mech is not None:
        print(f"mechanical basis width {reduced_mech.r}")
    print(f"bundle written to {out}")
    return EXIT_PASS


# ---------------------------------------------------------------- verify

def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, tail = text.split(":")
        if tail.endswith("-log"):
            points = int(tail[:-4])
        elif tail.endswith("-lin"):
            return np.linspace(float(lo), float(hi), int(tail[:-4]))
        else:
            points = int(tail)
        return log_grid(float(lo), float(hi), points)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad --grid {text!r}, expected lo:hi:points-log") from exc


def _parse_htc_samples(args, patch_names) -> list[ParameterSample]:
    n_c = len(patch_names)
    samples = []
    if args.htc:
        values = {}
        for item in args.htc:
            try:
                key, val = item.split("=")
                values[key] = float(val)
            except ValueError as exc:
                raise ConfigError(f"bad --htc {item!r}, expected patch=value") from exc
        samples.append(ParameterSample.from_mapping(patch_names, values))
    for item in args.htc_sample or ():
        values = {}
        for part in item.split(","):
            try:
                key, val = part.split("=")
                values[key] = float(val)
            except ValueError as exc:
                raise ConfigError(f"bad --htc-sample {item!r}") from exc
        samples.append(ParameterSample.from_mapping(patch_names, values))
    if samples:
        return samples
    if n_c == 0:
        return [ParameterSample(())]
    # paper-style default grid, tiled over the patches
    seen = set()
    for pair in DEFAULT_HTC_PAIRS:
        htc = tuple(pair[i % 2] for i in range(n_c))
        if htc not in seen:
            seen.add(htc)
            samples.append(ParameterSample(htc))
    return samples


def _parse_pairs(args, p: int, m: int) -> list[tuple[int, int]]:
    if args.pairs:
        out = []
        for item in args.pairs:
            try:
                i, j = item.split(":")
                out.append((int(i), int(j)))
            except ValueError as exc:
                raise ConfigError(f"bad --pairs {item!r}, expected i:j") from exc
        for i, j in out:
            if not (0 <= i < p and 0 <= j < m):
                raise ConfigError(f"pair {i}:{j} outside output x input range {p}x{m}")
        return out
    return [(i, i) for i in range(min(p, m))]


def cmd_verify(args) -> int:
    try:
        thermal, mech = load_system(Path(args.manifest))
        reduced, reduced_mech, provenance = load_bundle(Path(args.bundle))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        grid = _parse_grid(args.grid)
        samples = _parse_htc_samples(args, thermal.patch_names)
        pairs = _parse_pairs(args, thermal.n_outputs, thermal.n_inputs)
        collocated = [pr for pr in pairs if pr[0] == pr[1]
                      and np.array_equal(thermal.B[:, pr[1]], thermal.C[pr[0], :])]
        noncollocated = [pr for pr in pairs if pr not in collocated]
        if noncollocated:
            print("note: the error bound is certified for collocated pairs only; "
                  f"pairs {noncollocated} are reported but not gated")

        s_e, omega_m = reduced.basis.s_e, reduced.basis.omega_m
        epsilon = args.max_frf_error if args.max_frf_error is not None else provenance.get("epsilon")
        omega_max = provenance.get("omega_max")
        write_csv(out / "estimator.csv", "omega,e_est",
                  ((float(w), float(e)) for w, e in
                   zip(grid, estimator(grid, s_e, omega_m))))

        violations = []
        results = {"samples": []}
        for sample in samples:
            report = bound_check(thermal, reduced, grid, pairs, sample)
            tag = sample.label()
            for pr in pairs:
                write_csv(out / f"frf_error_{pr[0]}_{pr[1]}_{tag}.csv",
                          "omega,abs_rel_error,e_est,margin",
                          (tuple(map(float, row)) for row in report.pair_rows(pr)))
            exceed = [x for x in report.exceedances if x[0] in collocated]
            if exceed:
                violations.append(f"sample {tag}: {len(exceed)} bound exceedance(s), "
                                  f"first at omega={exceed[0][1]:g}")
            inband = None
            if omega_max is not None and collocated:
                idx = [report.pairs.index(pr) for pr in collocated]
                vals = report.errors[np.ix_(idx, np.flatnonzero(grid <= omega_max))]
                vals = vals[np.isfinite(vals)]
                inband = float(vals.max()) if vals.size else 0.0
            if epsilon is not None and omega_max is not None and inband is not None \
                    and inband > epsilon:
                violations.append(f"sample {tag}: in-band error {inband:.3e} > epsilon {epsilon:g}")

            eig_entry = None
            if args.eigen_count > 0:
                from .analysis import compare_eigenvalues
                comp = compare_eigenvalues(thermal, reduced, sample, args.eigen_count)
                write_csv(out / f"eigen_error_{tag}.csv",
                          "index,alpha_full,alpha_reduced,rel_error",
                          ((k + 1, float(f), float(r), float(e)) for k, (f, r, e) in
                           enumerate(zip(comp.full_values, comp.reduced_values,
                                         comp.relative_errors))))
                eig_entry = comp.max_error
                if args.max_eigen_error is not None and comp.max_error > args.max_eigen_error:
                    violations.append(f"sample {tag}: eigen error {comp.max_error:.3e} > "
                                      f"{args.max_eigen_error:g}")

            mech_entry = None
            if mech is not None and reduced_mech is not None and mech.C.shape[0] > 0:
                mech_grid = grid[grid <= (omega_max or grid[-1])]
                if mech_grid.size >= 2:
                    full_m = thermo_mech_frf(thermal, mech, mech_grid, sample)
                    red_m = thermo_mech_frf(reduced, reduced_mech, mech_grid, sample)
                    mech_pairs = [(i, j) for i in range(mech.C.shape[0])
                                  for j in range(thermal.n_inputs)]
                    curves = relative_error_frf(full_m, red_m, mech_pairs)
                    for (i, j) in mech_pairs:
                        write_csv(out / f"mech_error_{i}_{j}_{tag}.csv",
                                  "omega,abs_rel_error",
                                  ((float(w), float(e)) for w, e in
                                   zip(mech_grid, curves.magnitude((i, j)))))
                    mech_entry = curves.max_error()
                    if args.max_mech_error is not None and mech_entry > args.max_mech_error:
                        violations.append(f"sample {tag}: mechanical error {mech_entry:.3e} > "
                                          f"{args.max_mech_error:g}")

            results["samples"].append({
                "htc": list(sample.htc),
                "max_error": report.max_error(),
                "in_band_error": inband,
                "collocated_exceedances": len(exceed),
                "max_eigen_error": eig_entry,
                "max_mech_error": mech_entry,
            })

        results.update({
            "versions": _versions(),
            "provenance": provenance,
            "grid": {"lo": float(grid[0]), "hi": float(grid[-1]), "points": int(grid.size)},
            "pairs": [list(pr) for pr in pairs],
            "violations": violations,
            "status": "fail" if violations else "pass",
        })
        atomic_write_text(out / "verify_report.json",
                          json.dumps(results, indent=2, sort_keys=True) + "\n")
    except KmsmorError as exc:
        print(f"verify failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc, NumericalError) else EXIT_CONFIG
    for v in violations:
        print(f"VIOLATION: {v}")
    print(f"verify {'FAILED' if violations else 'passed'}; reports in {out}")
    return EXIT_VIOLATION if violations else EXIT_PASS


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kmsmor", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="assemble a model from a config file")
    g.add_argument("config")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reduce", help="build the reduced model bundle")
    r.add_argument("manifest")
    r.add_argument("--epsilon", type=float, default=0.05)
    r.add_argument("--omega-max", type=float, default=0.01)
    r.add_argument("--expansion-point", type=float, default=DEFAULT_EXPANSION_POINT)
    r.add_argument("--bilinear-iters", type=int, default=DEFAULT_BILINEAR_ITERATIONS)
    r.add_argument("--max-modes", type=int, default=500)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reduce)

    v = sub.add_parser("verify", help="compare the bundle against the full model")
    v.add_argument("manifest")
    v.add_argument("bundle")
    v.add_argument("--htc", action="append", metavar="PATCH=VALUE",
                   help="one sample entry; repeat per patch")
    v.add_argument("--htc-sample", action="append", metavar="P1=V1,P2=V2",
                   help="a full sample; repeatable")
    v.add_argument("--grid", default="1e-5:1:200-log")
    v.add_argument("--pairs", action="append", metavar="I:J")
    v.add_argument("--eigen-count", type=int, default=20)
    v.add_argument("--max-frf-error", type=float, default=None,
                   help="in-band gate; defaults to the bundle epsilon")
    v.add_argument("--max-eigen-error", type=float, default=None)
    v.add_argument("--max-mech-error", type=float, default=None)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

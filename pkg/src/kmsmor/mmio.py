"""File interchange: MatrixMarket matrices, JSON manifests, basis and bundle files.

Sparse matrices travel in coordinate MatrixMarket text format (1-based
indices, symmetric storage for symmetric matrices); dense matrices and
vectors use the array variant.  Values are written with shortest exact
formatting, so a save/load round trip reproduces every float bit for bit.
All writes go through a temp-file-and-rename so readers never see partial
files.
"""
from __future__ import annotations

import io
import json
import os
from pathlib import Path

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .errors import ConfigError
from .mechanical import ReducedMechanicalModel
from .reduction import BasisTag, ReducedModel, ReductionBasis
from .systems import MechanicalSystem, ThermalSystem

_BASIS_MAGIC = "#kmsmor-basis v1"


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path: Path, header: str, rows) -> None:
    """CSV with deterministic shortest-exact float formatting."""
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_matrix(path: Path, M, symmetric: bool = False) -> None:
    buf = io.BytesIO()
    if sp.issparse(M):
        sio.mmwrite(buf, M.tocoo(), symmetry="symmetric" if symmetric else "general")
    else:
        arr = np.asarray(M, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        sio.mmwrite(buf, arr, symmetry="symmetric" if symmetric else "general")
    atomic_write_bytes(path, buf.getvalue())


def read_matrix(path: Path):
    try:
        M = sio.mmread(str(path))
    except Exception as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc}") from exc
    return sp.csc_matrix(M) if sp.issparse(M) else np.asarray(M, dtype=float)


def save_system(outdir: Path, thermal: ThermalSystem,
                mech: MechanicalSystem | None = None) -> Path:
    """Write matrix files plus manifest.json; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_matrix(outdir / "E.mtx", thermal.E, symmetric=True)
    write_matrix(outdir / "A.mtx", thermal.A, symmetric=True)
    write_matrix(outdir / "B.mtx", thermal.B)
    write_matrix(outdir / "C.mtx", thermal.C)
    patches = []
    for name, Di in zip(thermal.patch_names, thermal.D):
        fname = f"D_{name}.mtx"
        write_matrix(outdir / fname, Di, symmetric=True)
        patches.append({"name": name, "D": fname})
    manifest = {
        "thermal": {
            "E": "E.mtx", "A": "A.mtx", "B": "B.mtx", "C": "C.mtx",
            "patches": patches,
            "input_labels": list(thermal.input_labels),
        },
    }
    if mech is not None:
        write_matrix(outdir / "K.mtx", mech.K, symmetric=True)
        write_matrix(outdir / "K_th.mtx", mech.K_th)
        write_matrix(outdir / "B_ext.mtx", mech.B_ext)
        write_matrix(outdir / "C_mech.mtx", mech.C)
        write_matrix(outdir / "x_ref.mtx", mech.x_ref)
        manifest["mechanical"] = {
            "K": "K.mtx", "K_th": "K_th.mtx", "B_ext": "B_ext.mtx",
            "C_mech": "C_mech.mtx", "x_ref": "x_ref.mtx",
            "n_full": mech.n_full,
            "free_dofs": "free_dofs.mtx" if mech.free_dofs is not None else None,
        }
        if mech.free_dofs is not None:
            write_matrix(outdir / "free_dofs.mtx", mech.free_dofs.astype(float))
    path = outdir / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def load_system(manifest: Path, *, validate: bool = True,
                ) -> tuple[ThermalSystem, MechanicalSystem | None]:
    """Load a system from its manifest; every TYPE invariant is re-checked.

    A manifest without a patch list yields a valid non-parametric system
    (n_c = 0).  Validation failures name the offending matrix and check.
    """
    manifest = Path(manifest)
    try:
        spec = json.loads(manifest.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {manifest}: {exc}") from exc
    base = manifest.parent
    if "thermal" not in spec:
        raise ConfigError("manifest missing 'thermal' section")
    th = spec["thermal"]
    for role in ("E", "A", "B", "C"):
        if role not in th:
            raise ConfigError(f"manifest thermal section missing role {role!r}")
    E = read_matrix(base / th["E"])
    A = read_matrix(base / th["A"])
    B = _dense(read_matrix(base / th["B"]))
    C = _dense(read_matrix(base / th["C"]))
    patches = th.get("patches", [])
    D = tuple(read_matrix(base / p["D"]) for p in patches)
    names = tuple(p["name"] for p in patches)
    labels = tuple(th.get("input_labels", ()))
    thermal = ThermalSystem(E=E, A=A, D=D, B=B, C=C, patch_names=names, input_labels=labels)
    if validate:
        thermal.validate()

    mech = None
    if spec.get("mechanical"):
        me = spec["mechanical"]
        for role in ("K", "K_th", "B_ext", "C_mech", "x_ref"):
            if role not in me:
                raise ConfigError(f"manifest mechanical section missing role {role!r}")
        free = None
        if me.get("free_dofs"):
            free = _dense(read_matrix(base / me["free_dofs"]))
            free = free.ravel().astype(int)
        mech = MechanicalSystem(
            K=read_matrix(base / me["K"]),
            K_th=read_matrix(base / me["K_th"]),
            B_ext=_dense(read_matrix(base / me["B_ext"])),
            C=_dense(read_matrix(base / me["C_mech"])),
            x_ref=_dense(read_matrix(base / me["x_ref"])).ravel(),
            free_dofs=free,
            n_full=me.get("n_full"),
        )
        if validate:
            mech.validate()
    return thermal, mech


def save_basis(path: Path, basis: ReductionBasis) -> None:
    """Basis export: text header + column-major float64 block, or CSV by extension."""
    path = Path(path)
    header = {
        "n": basis.n, "r": basis.r, "mu": basis.mu,
        "s_e": basis.s_e, "omega_m": basis.omega_m,
        "pre_deflation_width": basis.pre_deflation_width,
        "tags": [str(t) for t in basis.tags],
    }
    if path.suffix == ".csv":
        lines = [_BASIS_MAGIC.replace("#", "#csv "), "#" + json.dumps(header, sort_keys=True)]
        for i in range(basis.n):
            lines.append(",".join(f"{x:.17g}" for x in basis.V[i]))
        atomic_write_text(path, "\n".join(lines) + "\n")
        return
    blob = (_BASIS_MAGIC + "\n" + json.dumps(header, sort_keys=True) + "\n").encode("utf-8")
    blob += np.asfortranarray(basis.V).tobytes(order="F")
    atomic_write_bytes(path, blob)


def load_basis(path: Path) -> ReductionBasis:
    path = Path(path)
    if path.suffix == ".csv":
        lines = path.read_text().splitlines()
        if not lines or not lines[0].startswith("#csv"):
            raise ConfigError(f"{path} is not a basis CSV file")
        header = json.loads(lines[1][1:])
        V = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:] if ln])
    else:
        raw = path.read_bytes()
        nl1 = raw.index(b"\n")
        if raw[:nl1].decode("utf-8") != _BASIS_MAGIC:
            raise ConfigError(f"{path} is not a basis file")
        nl2 = raw.index(b"\n", nl1 + 1)
        header = json.loads(raw[nl1 + 1:nl2].decode("utf-8"))
        V = np.frombuffer(raw[nl2 + 1:], dtype=np.float64)
        V = V.reshape((header["n"], header["r"]), order="F").copy()
    tags = tuple(BasisTag.parse(t) for t in header["tags"])
    return ReductionBasis(V=V, tags=tags, s_e=header["s_e"], omega_m=header["omega_m"],
                          pre_deflation_width=header.get("pre_deflation_width"))


def save_bundle(outdir: Path, reduced: ReducedModel,
                reduced_mech: ReducedMechanicalModel | None,
                provenance: dict) -> None:
    """Write the reduced-model bundle: projected matrices, bases, provenance."""
    outdir = Path(outdir)
    (outdir / "reduced").mkdir(parents=True, exist_ok=True)
    save_basis(outdir / "thermal_basis.kmb", reduced.basis)
    write_matrix(outdir / "reduced" / "E.mtx", reduced.E, symmetric=True)
    write_matrix(outdir / "reduced" / "A.mtx", reduced.A, symmetric=True)
    write_matrix(outdir / "reduced" / "B.mtx", reduced.B)
    write_matrix(outdir / "reduced" / "C.mtx", reduced.C)
    for name, Di in zip(reduced.patch_names, reduced.D):
        write_matrix(outdir / "reduced" / f"D_{name}.mtx", Di, symmetric=True)
    meta = {
        "patch_names": list(reduced.patch_names),
        "input_labels": list(reduced.input_labels),
        "has_mechanical": reduced_mech is not None,
    }
    if reduced_mech is not None:
        (outdir / "reduced_mech").mkdir(parents=True, exist_ok=True)
        save_basis(outdir / "mech_basis.kmb", reduced_mech.basis)
        write_matrix(outdir / "reduced_mech" / "K.mtx", reduced_mech.K, symmetric=True)
        write_matrix(outdir / "reduced_mech" / "coupling.mtx", reduced_mech.coupling)
        write_matrix(outdir / "reduced_mech" / "f_ref.mtx", reduced_mech.f_ref)
        write_matrix(outdir / "reduced_mech" / "B_ext.mtx", reduced_mech.B_ext)
        write_matrix(outdir / "reduced_mech" / "C.mtx", reduced_mech.C)
    atomic_write_text(outdir / "bundle.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    atomic_write_text(outdir / "provenance.json",
                      json.dumps(provenance, indent=2, sort_keys=True) + "\n")


def load_bundle(outdir: Path) -> tuple[ReducedModel, ReducedMechanicalModel | None, dict]:
    outdir = Path(outdir)
    try:
        meta = json.loads((outdir / "bundle.json").read_text())
        provenance = json.loads((outdir / "provenance.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read bundle in {outdir}: {exc}") from exc
    basis = load_basis(outdir / "thermal_basis.kmb")
    names = tuple(meta["patch_names"])
    reduced = ReducedModel(
        E=_dense(read_matrix(outdir / "reduced" / "E.mtx")),
        A=_dense(read_matrix(outdir / "reduced" / "A.mtx")),
        D=tuple(_dense(read_matrix(outdir / "reduced" / f"D_{nm}.mtx")) for nm in names),
        B=_dense(read_matrix(outdir / "reduced" / "B.mtx")),
        C=_dense(read_matrix(outdir / "reduced" / "C.mtx")),
        basis=basis,
        patch_names=names,
        input_labels=tuple(meta["input_labels"]),
    )
    reduced_mech = None
    if meta.get("has_mechanical"):
        mech_basis = load_basis(outdir / "mech_basis.kmb")
        reduced_mech = ReducedMechanicalModel(
            K=_dense(read_matrix(outdir / "reduced_mech" / "K.mtx")),
            coupling=_dense(read_matrix(outdir / "reduced_mech" / "coupling.mtx")),
            f_ref=_dense(read_matrix(outdir / "reduced_mech" / "f_ref.mtx")).ravel(),
            B_ext=_dense(read_matrix(outdir / "reduced_mech" / "B_ext.mtx")),
            C=_dense(read_matrix(outdir / "reduced_mech" / "C.mtx")),
            basis=mech_basis,
            thermal_r=basis.r,
        )
    return reduced, reduced_mech, provenance

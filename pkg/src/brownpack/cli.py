"""Command-line surface.

Subcommands: langevin, dispersion, disco, reject, erode, stats,
fit-directions. Flags mirror config keys one to one; precedence is
flags > config file > values stored in an input container > defaults.
Every run writes its effective config next to its outputs, and re-running
from that file reproduces the outputs byte for byte.

Exit codes: 0 success, 1 configuration error, 2 numeric/domain error,
3 I/O or container error. stdout carries a single JSON summary line;
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels
from .analysis import contacts_per_identity, histogram, leakage_minimum, rho_threshold, trace_summary
from .config import (
    DEFAULTS,
    _FLOAT_KEYS,
    _INT_KEYS,
    _OPT_FLOAT_KEYS,
    _OPT_INT_KEYS,
    ExperimentConfig,
    _check_types,
    parse_config,
)
from .container import (
    TraceData,
    read_container,
    save_covariates,
    save_ensemble,
    save_trace,
    save_variations,
)
from .covariates import CovariateBasis, LabeledLatents, fit_direction
from .dynamics import (
    IdentityEnsemble,
    VariationSet,
    disco_init,
    init_variations,
    langevin_init,
    run_dispersion,
    run_langevin,
)
from .errors import (
    BrownpackError,
    ConfigError,
    ContainerError,
    DomainError,
    NumericError,
    SaturationError,
    ShapeError,
)
from .geometry import pairwise_distances
from .losses import TrainingSetEmbeddings
from .models import build_model
from .sampling import build_contact_graph, erode, reject_sample

_FLAG_SKIP = {"w_avg"}  # vector-valued: configure via JSON only


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    for key in DEFAULTS:
        if key in _FLAG_SKIP:
            continue
        if key in _INT_KEYS or key in _OPT_INT_KEYS:
            kind = int
        elif key in _FLOAT_KEYS or key in _OPT_FLOAT_KEYS:
            kind = float
        else:
            kind = str
        parser.add_argument(_flag(key), dest=key, type=kind, default=None)


def _flag_overrides(args: argparse.Namespace) -> dict:
    return {k: getattr(args, k) for k in DEFAULTS if k not in _FLAG_SKIP
            and getattr(args, k, None) is not None}


def _container_layer(obj) -> dict:
    """Config values implied by an input container (lowest merge priority)."""
    spec = obj.model_spec
    layer = {
        "model": spec.kind,
        "d_w": spec.d_w,
        "d_e": spec.d_e,
        "model_seed": spec.seed,
        "seed": obj.seed,
        **obj.params.to_dict(),
    }
    if spec.hidden is not None:
        layer["hidden"] = spec.hidden
    if isinstance(obj, IdentityEnsemble):
        layer["w_avg"] = [float(x) for x in obj.w_avg]
        layer["n_id"] = obj.n_id
        # stored n_iter records the trajectory's total, not a request
        layer.pop("n_iter", None)
    if isinstance(obj, VariationSet):
        layer["w_avg"] = [float(x) for x in obj.w_avg]
        layer["n_id"] = obj.n_id
        layer["n_var"] = obj.n_var
        layer.pop("n_iter_disp", None)
    return layer


def _build_config(args: argparse.Namespace, base_layer: dict | None = None) -> ExperimentConfig:
    file_data = {}
    if args.config:
        cfg_path = Path(args.config)
        try:
            raw = json.loads(cfg_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{cfg_path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{cfg_path}: config must be a JSON object")
        file_data = _check_types(raw, str(cfg_path))
    source = dict(base_layer or {})
    source.update(file_data)
    return parse_config(source, overrides=_flag_overrides(args))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_hist_csv(path: Path, hist) -> None:
    lines = ["bin_left,bin_right,count"]
    for i in range(hist.counts.shape[0]):
        lines.append(f"{hist.bin_edges[i]!r},{hist.bin_edges[i + 1]!r},{hist.counts[i]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _prepare_out(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", cfg.to_dict())
    return out


def _emit(summary: dict) -> None:
    print(json.dumps(_jsonable(summary), sort_keys=True))


def _load_kind(path, expected_type, what: str):
    obj = read_container(path)
    if not isinstance(obj, expected_type):
        raise ConfigError(f"{path} is not a {what} container")
    return obj


def _ensemble_stats(ensemble: IdentityEnsemble, model, d_ict: float) -> dict:
    E = model.embed_batch(ensemble.latents)
    if ensemble.n_id < 2:
        return {"mean_embedding_distance": None, "rho": None, "contacts_per_identity": None}
    D = pairwise_distances(E)
    upper = D[np.triu_indices(ensemble.n_id, k=1)]
    return {
        "mean_embedding_distance": float(np.mean(upper)),
        "rho": rho_threshold(D, d_ict),
        "contacts_per_identity": contacts_per_identity(D, d_ict),
    }


def _intra_class_distances(vs: VariationSet, model) -> np.ndarray:
    """Pooled per-identity pairwise embedding distances."""
    chunks = []
    iu = np.triu_indices(vs.n_var, k=1)
    for a in range(vs.n_id):
        E = model.embed_batch(vs.variations[a])
        chunks.append(pairwise_distances(E)[iu])
    return np.concatenate(chunks) if chunks else np.empty(0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_langevin(args) -> int:
    resumed = None
    if getattr(args, "input", None):
        resumed = _load_kind(args.input, IdentityEnsemble, "identities")
    elif args.config:
        peek = parse_config(args.config)
        if peek.input:
            resumed = _load_kind(peek.input, IdentityEnsemble, "identities")
    cfg = _build_config(args, _container_layer(resumed) if resumed else None)
    kernels.set_workers(cfg.effective_workers())
    out = _prepare_out(args, cfg)

    params = cfg.hyperparams()
    spec = cfg.model_spec()
    if resumed is not None:
        ensemble = resumed
        if spec.d_w != ensemble.latents.shape[1]:
            raise ConfigError(
                f"model d_w={spec.d_w} does not match the resumed latents "
                f"(D_w={ensemble.latents.shape[1]})"
            )
        ensemble.model_spec = spec
        ensemble.params = params
        ensemble.seed = cfg.seed
        if cfg.w_avg_vector() is not None:
            ensemble.w_avg = cfg.w_avg_vector()
    else:
        ensemble = langevin_init(cfg.n_id, spec, params, cfg.seed, cfg.sigma_init,
                                 cfg.w_avg_vector())
    training = None
    if cfg.training:
        training = _load_kind(cfg.training, TrainingSetEmbeddings, "embeddings")
        if cfg.n_tr and training.n != cfg.n_tr:
            raise ConfigError(f"training set holds {training.n} samples, config says n_tr={cfg.n_tr}")

    started_at = ensemble.iterations_done
    ensemble, trace = run_langevin(ensemble, cfg.n_iter, training=training)

    model = build_model(ensemble.model_spec)
    stats: dict = {
        "iterations_run": cfg.n_iter,
        "iterations_total": ensemble.iterations_done,
        "n_id": ensemble.n_id,
        "final": _ensemble_stats(ensemble, model, params.d0_e),
    }
    if len(trace):
        stats["initial"] = {
            "mean_embedding_distance": float(trace.mean_embedding_distance[0]),
            "rho": float(trace.contact_ratio[0]),
        }
        stats["trace"] = trace_summary(trace)
    if training is not None:
        min_d, pair, _ = leakage_minimum(ensemble, model, training)
        stats["training_leakage"] = {"min_distance": min_d,
                                     "synthetic": pair[0], "training": pair[1]}

    # the persisted counter describes the trajectory, so a split run and a
    # whole run of equal total length produce byte-identical containers
    ensemble.params = replace(ensemble.params, n_iter=ensemble.iterations_done)
    save_ensemble(out / "ensemble.bide", ensemble)
    save_trace(out / "trace.bide", trace.to_series())
    _write_json(out / "stats.json", stats)
    _emit({"command": "langevin", "out": str(out), "resumed_at": started_at, **stats})
    return 0


def _variation_run(args, algorithm: str) -> int:
    if not getattr(args, "input", None) and not args.config:
        raise ConfigError(f"{algorithm} requires a reference ensemble (--input)")
    input_path = getattr(args, "input", None)
    if not input_path and args.config:
        input_path = parse_config(args.config).input
    if not input_path:
        raise ConfigError(f"{algorithm} requires a reference ensemble (--input)")
    reference = _load_kind(input_path, IdentityEnsemble, "identities")
    cfg = _build_config(args, _container_layer(reference))
    kernels.set_workers(cfg.effective_workers())
    out = _prepare_out(args, cfg)

    params = cfg.hyperparams()
    spec = cfg.model_spec()
    if spec.d_w != reference.latents.shape[1]:
        raise ConfigError(
            f"model d_w={spec.d_w} does not match the reference latents "
            f"(D_w={reference.latents.shape[1]})"
        )
    reference.model_spec = spec
    reference.params = params
    if cfg.w_avg_vector() is not None:
        reference.w_avg = cfg.w_avg_vector()
    model = build_model(reference.model_spec)

    if algorithm == "disco":
        if not cfg.covariates:
            raise ConfigError("disco requires a covariates container (--covariates)")
        basis = _load_kind(cfg.covariates, CovariateBasis, "covariates")
        if basis.directions.shape[1] != reference.model_spec.d_w:
            raise ConfigError(
                f"covariate directions have length {basis.directions.shape[1]}, "
                f"latents have length {reference.model_spec.d_w}"
            )
        vs = disco_init(reference, cfg.n_var, params.xi0, params.lambda0, basis,
                        cfg.seed, model=model)
    else:
        vs = init_variations(reference, cfg.n_var, params.xi0, cfg.seed, model=model)

    vs, trace = run_dispersion(vs, model=model)

    intra = _intra_class_distances(vs, model)
    stats = {
        "n_id": vs.n_id,
        "n_var": vs.n_var,
        "iterations_run": params.n_iter_disp,
        "final_intra_class_embedding_distance": {
            "mean": float(np.mean(intra)) if intra.size else None,
            "min": float(np.min(intra)) if intra.size else None,
            "max": float(np.max(intra)) if intra.size else None,
        },
    }
    if len(trace):
        stats["trace"] = trace_summary(trace)

    vs.params = replace(vs.params, n_iter_disp=vs.iterations_done)
    save_variations(out / "variations.bide", vs)
    save_trace(out / "trace.bide", trace.to_series())
    _write_json(out / "stats.json", stats)
    _emit({"command": algorithm, "out": str(out), **stats})
    return 0


def cmd_dispersion(args) -> int:
    return _variation_run(args, "dispersion")


def cmd_disco(args) -> int:
    return _variation_run(args, "disco")


def cmd_reject(args) -> int:
    cfg = _build_config(args)
    kernels.set_workers(cfg.effective_workers())
    if cfg.ict is None:
        raise ConfigError("reject requires an inter-class threshold (--ict)")
    out = _prepare_out(args, cfg)
    max_attempts = cfg.max_attempts if cfg.max_attempts is not None else 200 * cfg.n_id
    model = build_model(cfg.model_spec())
    ensemble, attempts = reject_sample(
        model, cfg.n_id, cfg.ict, max_attempts, cfg.seed, cfg.sigma_init,
        params=cfg.hyperparams(), w_avg=cfg.w_avg_vector(),
    )
    save_ensemble(out / "ensemble.bide", ensemble)
    save_trace(out / "trace.bide", {"attempts_at_accept": attempts.astype(np.float64)})
    summary = {
        "command": "reject", "out": str(out), "n_id": ensemble.n_id,
        "ict": cfg.ict, "attempts_total": int(attempts[-1]),
        "mean_attempts_per_accept": float(attempts[-1]) / ensemble.n_id,
    }
    _emit(summary)
    return 0


def cmd_erode(args) -> int:
    input_path = getattr(args, "input", None) or (
        parse_config(args.config).input if args.config else None)
    if not input_path:
        raise ConfigError("erode requires an ensemble container (--input)")
    ensemble = _load_kind(input_path, IdentityEnsemble, "identities")
    cfg = _build_config(args, _container_layer(ensemble))
    kernels.set_workers(cfg.effective_workers())
    if cfg.ict is not None:
        threshold = cfg.ict
    elif cfg.d0_factor is not None:
        threshold = ensemble.params.d0_e / cfg.d0_factor
    else:
        raise ConfigError("erode requires --ict or --d0-factor")
    out = _prepare_out(args, cfg)

    model = build_model(ensemble.model_spec)
    graph = build_contact_graph(ensemble, model, threshold)
    survivors = erode(graph)
    sub = IdentityEnsemble(
        latents=ensemble.latents[survivors],
        model_spec=ensemble.model_spec,
        params=ensemble.params,
        seed=ensemble.seed,
        iterations_done=ensemble.iterations_done,
        w_avg=ensemble.w_avg,
    )
    save_ensemble(out / "ensemble.bide", sub)
    _write_json(out / "survivors.json", {
        "threshold": threshold,
        "n_input": ensemble.n_id,
        "n_survivors": int(survivors.shape[0]),
        "survivors": [int(v) for v in survivors],
    })
    _emit({"command": "erode", "out": str(out), "threshold": threshold,
           "n_input": ensemble.n_id, "n_survivors": int(survivors.shape[0]),
           "contacts_removed": int(graph.edges.shape[0])})
    return 0


def cmd_stats(args) -> int:
    input_path = getattr(args, "input", None) or (
        parse_config(args.config).input if args.config else None)
    if not input_path:
        raise ConfigError("stats requires an ensemble container (--input)")
    ensemble = _load_kind(input_path, IdentityEnsemble, "identities")
    cfg = _build_config(args, _container_layer(ensemble))
    kernels.set_workers(cfg.effective_workers())
    out = _prepare_out(args, cfg)
    model = build_model(ensemble.model_spec)
    threshold = cfg.ict if cfg.ict is not None else ensemble.params.d0_e

    summary: dict = {"n_id": ensemble.n_id, "threshold": threshold}
    E = model.embed_batch(ensemble.latents)
    D = pairwise_distances(E)
    upper = D[np.triu_indices(ensemble.n_id, k=1)]
    _write_hist_csv(out / "inter_class_hist.csv", histogram(upper, cfg.bins))
    summary["inter_class"] = {
        "mean": float(np.mean(upper)) if upper.size else None,
        "min": float(np.min(upper)) if upper.size else None,
        "rho": rho_threshold(D, threshold) if ensemble.n_id >= 2 else None,
        "contacts_per_identity": contacts_per_identity(D, threshold) if ensemble.n_id >= 2 else None,
    }

    if cfg.variations:
        vs = _load_kind(cfg.variations, VariationSet, "variations")
        intra = _intra_class_distances(vs, build_model(vs.model_spec))
        _write_hist_csv(out / "intra_class_hist.csv", histogram(intra, cfg.bins))
        summary["intra_class"] = {
            "mean": float(np.mean(intra)) if intra.size else None,
            "max": float(np.max(intra)) if intra.size else None,
            "n_var": vs.n_var,
        }

    if cfg.training:
        training = _load_kind(cfg.training, TrainingSetEmbeddings, "embeddings")
        min_d, pair, cross = leakage_minimum(ensemble, model, training)
        _write_hist_csv(out / "training_hist.csv", histogram(cross.ravel(), cfg.bins))
        summary["synthetic_to_training"] = {
            "min": min_d, "argmin_synthetic": pair[0], "argmin_training": pair[1],
            "mean": float(np.mean(cross)),
        }

    _write_json(out / "stats.json", summary)
    _emit({"command": "stats", "out": str(out), **summary})
    return 0


def cmd_fit_directions(args) -> int:
    cfg = _build_config(args)
    if not cfg.labeled:
        raise ConfigError("fit-directions requires a labeled-latents JSON file (--labeled)")
    out = _prepare_out(args, cfg)
    try:
        doc = json.loads(Path(cfg.labeled).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{cfg.labeled}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "latents" not in doc or "labels" not in doc:
        raise ConfigError(f"{cfg.labeled}: expected an object with 'latents' and 'labels'")
    latents = np.asarray(doc["latents"], dtype=np.float64)
    labels = doc["labels"]
    if isinstance(labels, dict):
        label_sets = list(labels.items())
    else:
        label_sets = [("direction_0", labels)]
    directions = []
    names = []
    for name, ls in label_sets:
        data = LabeledLatents(latents, np.asarray(ls))
        directions.append(fit_direction(data, cfg.ridge))
        names.append(str(name))
    basis = CovariateBasis(np.stack(directions), names)
    save_covariates(out / "covariates.bide", basis)
    _emit({"command": "fit-directions", "out": str(out), "k": basis.k,
           "names": names, "solver": "ridge-least-squares", "ridge": cfg.ridge})
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "langevin": cmd_langevin,
    "dispersion": cmd_dispersion,
    "disco": cmd_disco,
    "reject": cmd_reject,
    "erode": cmd_erode,
    "stats": cmd_stats,
    "fit-directions": cmd_fit_directions,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brownpack",
        description="Latent-space identity packing and variation generation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        _add_config_flags(p)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = _COMMANDS[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SaturationError as exc:
        print(f"saturation: {exc}", file=sys.stderr)
        print(json.dumps({"error": "saturation", "accepted": exc.accepted,
                          "attempts": exc.attempts}), file=sys.stderr)
        return 2
    except (ShapeError, DomainError, NumericError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 2
    except (ContainerError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except BrownpackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line pipelines over the library.

Every analysis subcommand loads a training matrix, runs one part of the
library and writes a small report directory: CSV tables with a header
line, JSON summaries and a manifest listing every emitted file with its
checksum. Files are staged under temporary names and renamed only after
the whole report succeeded, so a crashed run leaves no partial output.

A plain key = value config file can preload any flag; explicit flags
win over the file. All randomness flows from the single --seed flag.
"""

import functools
import glob
import hashlib
import json
import os

import click
import numpy as np

from . import dimred, gram, ingest, optim, oscillator, spectral, statmech
from .errors import GramkitError

# config keys whose flag name differs from the parameter name
_CONFIG_ALIASES = {
    "input": "input_path",
    "format": "data_format",
    "rank-reduce": "rank_reduce",
    "energy-model": "energy_model",
}


def _format_float(v):
    return "%.17g" % float(v)


class Report:
    """Collects report files in memory and publishes them atomically.

    finalize() writes each payload to a dotted temporary name inside the
    output directory, renames everything into place and then writes the
    manifest the same way. Byte-identical inputs produce byte-identical
    manifests, so the manifest digest doubles as a reproducibility
    check.
    """

    def __init__(self, out_dir, command, seed, config):
        self.out_dir = out_dir
        self.command = command
        self.seed = seed
        self.config = config
        self.payloads = {}

    def add_csv(self, name, header, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_format_float(v) for v in row))
        self.payloads[name] = ("\n".join(lines) + "\n").encode("ascii")

    def add_json(self, name, payload):
        text = json.dumps(payload, sort_keys=True, indent=2)
        self.payloads[name] = (text + "\n").encode("ascii")

    def finalize(self):
        os.makedirs(self.out_dir, exist_ok=True)
        config = {k: self.config[k] for k in sorted(self.config)}
        config_blob = json.dumps(
            config, sort_keys=True, separators=(",", ":")
        ).encode("ascii")
        manifest = {
            "command": self.command,
            "seed": self.seed,
            "config": config,
            "config_hash": hashlib.sha256(config_blob).hexdigest(),
            "files": [
                {
                    "name": name,
                    "bytes": len(self.payloads[name]),
                    "sha256": hashlib.sha256(self.payloads[name]).hexdigest(),
                }
                for name in sorted(self.payloads)
            ],
        }
        staged = []
        try:
            for name in sorted(self.payloads):
                tmp = os.path.join(self.out_dir, ".tmp." + name)
                with open(tmp, "wb") as fh:
                    fh.write(self.payloads[name])
                staged.append((tmp, os.path.join(self.out_dir, name)))
            manifest_blob = (
                json.dumps(manifest, sort_keys=True, indent=2) + "\n"
            ).encode("ascii")
            tmp = os.path.join(self.out_dir, ".tmp.manifest.json")
            with open(tmp, "wb") as fh:
                fh.write(manifest_blob)
            staged.append((tmp, os.path.join(self.out_dir, "manifest.json")))
        except OSError:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.remove(tmp)
            raise
        for tmp, final in staged:
            os.replace(tmp, final)
        return len(staged)


def _coerce(text):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _read_config(path):
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise click.ClickException(
                        "%s:%d: expected key = value" % (path, lineno)
                    )
                key, _, val = line.partition("=")
                key = key.strip().lower()
                key = _CONFIG_ALIASES.get(key, key.replace("-", "_"))
                values[key] = _coerce(val.strip().strip("'\""))
    except OSError as exc:
        raise click.ClickException("cannot read config: %s" % exc)
    return values


def _merge_config(ctx, values):
    """Overlay config-file values under explicitly passed flags."""
    path = values.pop("config_path", None)
    file_values = _read_config(path) if path else {}
    for key, val in file_values.items():
        if key not in values:
            continue
        source = ctx.get_parameter_source(key)
        if source is None or source.name == "DEFAULT":
            values[key] = val
    return values, file_values


def _domain_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except GramkitError as exc:
            raise click.ClickException(
                "%s: %s" % (type(exc).__name__, exc)
            )
    return wrapper


def _data_options(f):
    for option in reversed([
        click.option("--input", "input_path", type=str, default=None,
                     help="Data file, or a directory to search for one."),
        click.option("--format", "data_format",
                     type=click.Choice(["idx", "csv"]), default="idx",
                     show_default=True, help="Input encoding."),
        click.option("--take", type=int, default=None,
                     help="Keep only the first TAKE observations."),
        click.option("--rank-reduce", "rank_reduce", type=int, default=None,
                     help="Project the data onto its top spectral "
                          "directions before analysis."),
    ]):
        f = option(f)
    return f


def _common_options(f):
    for option in reversed([
        click.option("--seed", type=int, default=0, show_default=True,
                     help="Seed for every random draw in the command."),
        click.option("--out", "out_dir", type=str, default=".",
                     show_default=True, help="Report output directory."),
        click.option("--config", "config_path", type=str, default=None,
                     help="key = value file preloading any flag."),
    ]):
        f = option(f)
    return f


def _resolve_input(input_path, data_format):
    if input_path is None:
        env_dir = os.environ.get("MNIST_DIR")
        if env_dir:
            input_path = env_dir
        else:
            raise click.UsageError("missing --input")
    if os.path.isdir(input_path):
        if data_format == "idx":
            pattern = os.path.join(input_path, "*images-idx3-ubyte*")
        else:
            pattern = os.path.join(input_path, "*.csv")
        matches = sorted(glob.glob(pattern))
        if not matches:
            raise click.ClickException(
                "no %s data found under %s" % (data_format, input_path)
            )
        preferred = [m for m in matches if "train" in os.path.basename(m)]
        return (preferred or matches)[0]
    return input_path


def _load_matrix(values, file_values):
    path = _resolve_input(values.get("input_path"), values["data_format"])
    if values["data_format"] == "idx":
        normalization = file_values.get(
            "normalization", ingest.NORMALIZATION_UNIT
        )
    else:
        normalization = file_values.get(
            "normalization", ingest.NORMALIZATION_NONE
        )
    config = ingest.DatasetConfig(
        path=path,
        format=values["data_format"],
        max_observations=values.get("take"),
        normalization=normalization,
        scale=float(file_values.get("scale", 255.0)),
        rank_reduce_to=values.get("rank_reduce"),
    )
    try:
        return ingest.load_dataset(config), path
    except OSError as exc:
        raise click.ClickException("cannot read %s: %s" % (path, exc))


def _config_for_manifest(values, resolved_path):
    config = {}
    for key, val in values.items():
        if key in ("out_dir",):
            continue
        if key == "input_path":
            val = resolved_path
        if val is None or isinstance(val, (bool, int, float, str)):
            config[key] = val
    return config


def _matrix_header(n_cols, prefix="c"):
    return ["%s%d" % (prefix, j) for j in range(n_cols)]


def _finish(report):
    count = report.finalize()
    click.echo(
        "wrote %d files to %s" % (count, os.path.abspath(report.out_dir))
    )


@click.group()
@click.version_option(version="0.1.0", prog_name="gramkit")
def main():
    """Training-matrix analysis pipelines."""


@main.command("ingest")
@_data_options
@_common_options
@click.pass_context
@_domain_errors
def ingest_command(ctx, **values):
    """Load a dataset, normalize it and write the training matrix."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    a = matrix.values
    report = Report(values["out_dir"], "ingest", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv("matrix.csv", _matrix_header(a.shape[1]), a)
    report.add_json("summary.json", {
        "observations": matrix.p,
        "observables": matrix.n_obs,
        "normalization": matrix.normalization,
        "scale": matrix.scale,
        "min": float(a.min()),
        "max": float(a.max()),
        "frobenius_sq": float(np.sum(a * a)),
    })
    _finish(report)


@main.command("gram")
@_data_options
@click.option("--threshold", type=float, default=None,
              help="Also write the overlap graph at this edge threshold.")
@_common_options
@click.pass_context
@_domain_errors
def gram_command(ctx, **values):
    """Write both Gram matrices of the training data."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    pair = gram.gram_matrices(matrix)
    report = Report(values["out_dir"], "gram", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv("G.csv", _matrix_header(pair.g.shape[1]), pair.g)
    report.add_csv("Gp.csv", _matrix_header(pair.g_prime.shape[1]),
                   pair.g_prime)
    if values.get("threshold") is not None:
        adjacency, degrees = gram.training_graph(pair, values["threshold"])
        report.add_csv("graph_degrees.csv", ["index", "degree"],
                       np.column_stack([np.arange(degrees.size), degrees]))
        report.add_csv("graph_adjacency.csv",
                       _matrix_header(adjacency.shape[1]),
                       adjacency.astype(float))
    _finish(report)


@main.command("project")
@_data_options
@_common_options
@click.pass_context
@_domain_errors
def project_command(ctx, **values):
    """Write the diagonals of both training projectors and the RSS."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    pair = gram.projections(matrix)
    report = Report(values["out_dir"], "project", values["seed"],
                    _config_for_manifest(values, path))
    diag_obs = np.diag(pair.p_prime)
    diag_var = np.diag(pair.p)
    report.add_csv(
        "projection_diag_observations.csv",
        ["index", "self_projection", "residual_sq"],
        np.column_stack([
            np.arange(diag_obs.size), diag_obs, 1.0 - diag_obs,
        ]),
    )
    report.add_csv(
        "projection_diag_observables.csv",
        ["index", "self_projection"],
        np.column_stack([np.arange(diag_var.size), diag_var]),
    )
    report.add_json("projection_summary.json", {
        "rss": gram.rss(pair),
        "pseudo_rank": pair.pseudo_rank,
        "trace_observation_projector": float(np.trace(pair.p_prime)),
        "trace_observable_projector": float(np.trace(pair.p)),
    })
    _finish(report)


@main.command("correlate")
@_data_options
@click.option("--threshold", type=float, default=None,
              help="Also write the pairs with correlation at or above "
                   "this magnitude.")
@_common_options
@click.pass_context
@_domain_errors
def correlate_command(ctx, **values):
    """Write observable correlations with confidence half-widths."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    corr, half = gram.pearson(matrix)
    report = Report(values["out_dir"], "correlate", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv("correlations.csv", _matrix_header(corr.shape[1]), corr)
    report.add_csv("correlation_halfwidths.csv",
                   _matrix_header(half.shape[1]), half)
    if values.get("threshold") is not None:
        rows = []
        for i in range(corr.shape[0]):
            for j in range(i + 1, corr.shape[1]):
                if np.isfinite(corr[i, j]) and (
                    abs(corr[i, j]) >= values["threshold"]
                ):
                    rows.append((i, j, corr[i, j]))
        edges = np.array(rows, dtype=float) if rows else np.empty((0, 3))
        report.add_csv("correlation_edges.csv", ["i", "j", "corr"], edges)
    _finish(report)


@main.command("spectral")
@_data_options
@click.option("--n", type=int, default=4, show_default=True,
              help="Number of top mappings to histogram.")
@_common_options
@click.pass_context
@_domain_errors
def spectral_command(ctx, **values):
    """Write the spectrum, its energy profile and mapping histograms."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    f = spectral.svd(matrix)
    energy = spectral.cumulative_energy(f)
    report = Report(values["out_dir"], "spectral", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv(
        "singular_values.csv",
        ["index", "singular_value", "eigenvalue", "cumulative_energy"],
        np.column_stack([
            np.arange(f.m_rank), f.lambdas, f.lambdas**2, energy,
        ]),
    )
    n_hist = min(values["n"], f.m_rank)
    for j in range(n_hist):
        mapping = spectral.eigen_mapping(matrix, f, j)
        counts, edges = np.histogram(mapping, bins=50)
        report.add_csv(
            "eigen_mapping_hist_%d.csv" % j,
            ["bin_left", "bin_right", "count"],
            np.column_stack([edges[:-1], edges[1:], counts]),
        )
    report.add_json("spectral_summary.json", {
        "rank": f.m_rank,
        "top_singular_value": float(f.lambdas[0]) if f.m_rank else 0.0,
        "total_energy": float(np.sum(f.lambdas**2)),
    })
    _finish(report)


@main.command("moments")
@_data_options
@_common_options
@click.pass_context
@_domain_errors
def moments_command(ctx, **values):
    """Write fourth moments of the standardized eigen-observables."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    f = spectral.svd(matrix)
    scale = np.sqrt(matrix.p)
    moments = np.array([
        statmech.fourth_moment(scale * f.v[:, i]) for i in range(f.m_rank)
    ])
    bottom = moments[f.m_rank // 2:]
    report = Report(values["out_dir"], "moments", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv(
        "fourth_moments.csv",
        ["index", "fourth_moment"],
        np.column_stack([np.arange(f.m_rank), moments]),
    )
    report.add_json("moments_summary.json", {
        "rank": f.m_rank,
        "median_bottom_half": float(np.median(bottom)) if bottom.size else 0.0,
        "gaussian_reference": 3.0,
    })
    _finish(report)


@main.command("energy")
@_data_options
@click.option("--energy-model", "energy_model",
              type=click.Choice(list(statmech.ENERGY_MODELS)),
              default="ferro", show_default=True,
              help="Which observation energy to rank by.")
@click.option("--temperature", type=float, default=1.0, show_default=True,
              help="Temperature of the occupation weights.")
@_common_options
@click.pass_context
@_domain_errors
def energy_command(ctx, **values):
    """Rank observations by energy and weight them thermally."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    eps = statmech.energies(matrix, model=values["energy_model"])
    probs, partition, log_partition = statmech.boltzmann_probabilities(
        eps, values["temperature"]
    )
    order = np.argsort(eps, kind="stable")
    rows = np.column_stack([
        np.arange(order.size),
        order,
        eps[order],
        probs[order],
    ])
    report = Report(values["out_dir"], "energy", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv("energies.csv",
                   ["rank", "index", "energy", "probability"], rows)
    report.add_json("energy_summary.json", {
        "model": values["energy_model"],
        "temperature": values["temperature"],
        "partition": partition,
        "log_partition": log_partition,
        "min_energy": float(eps.min()),
        "max_energy": float(eps.max()),
    })
    _finish(report)


@main.command("dimred")
@_data_options
@click.option("--n", type=int, default=20, show_default=True,
              help="Latent dimension.")
@click.option("--scenario", type=click.Choice(list(dimred.SCENARIOS) + ["all"]),
              default="all", show_default=True,
              help="Which weight construction to report.")
@_common_options
@click.pass_context
@_domain_errors
def dimred_command(ctx, **values):
    """Report the exact rank-n reductions and their cross identities."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    a = matrix.values
    f = spectral.svd(a)
    n = min(values["n"], f.m_rank)
    x_hat, tail = dimred.truncate(f, n)
    total = float(np.sum(f.lambdas**2))
    rotation = dimred.random_rotation(n, values["seed"])
    names = (
        list(dimred.SCENARIOS) if values["scenario"] == "all"
        else [values["scenario"]]
    )
    scenarios = {}
    for name in names:
        ws = dimred.scenario_weights(f, n, name, rotation)
        y, y_prime = dimred.latent(a, ws)
        composed = ws.w2 @ ws.w1
        scenarios[name] = {
            "recon_error": dimred.recon_error(a, (a @ ws.w1) @ ws.w2),
            "composition_residual": float(
                np.linalg.norm(composed - np.eye(n))
            ),
            "latent_gram_vs_identity": float(
                np.linalg.norm(y.T @ y - np.eye(n))
            ),
            "latent_energy": float(np.sum(y * y)),
            "left_latent_energy": float(np.sum(y_prime * y_prime)),
        }
    payload = {
        "n": n,
        "tail_energy": tail,
        "total_energy": total,
        "retention": (total - tail) / total if total > 0 else 0.0,
        "recon_error_truncated": dimred.recon_error(a, x_hat),
        "scenarios": scenarios,
        "duality_residuals": dimred.duality_check(
            a, n, rotation, factors=f
        ),
    }
    report = Report(values["out_dir"], "dimred", values["seed"],
                    _config_for_manifest(values, path))
    report.add_json("dimred.json", payload)
    _finish(report)


@main.command("optimize")
@_data_options
@click.option("--n", type=int, default=4, show_default=True,
              help="Latent dimension.")
@click.option("--rule", type=click.Choice(list(optim.RULES)),
              default="untied", show_default=True,
              help="Update rule.")
@click.option("--delta", type=float, default=None,
              help="Step size; the default adapts to the spectrum.")
@click.option("--iters", type=int, default=50000, show_default=True,
              help="Iteration budget.")
@_common_options
@click.pass_context
@_domain_errors
def optimize_command(ctx, **values):
    """Train the two-layer reconstruction and write its trace."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    a = matrix.values
    report = Report(values["out_dir"], "optimize", values["seed"],
                    _config_for_manifest(values, path))
    if values["rule"] == "ortho":
        weights, info = optim.orthogonalize(
            a, values["n"], max_iters=values["iters"],
            delta=values["delta"], seed=values["seed"], record_every=1,
        )
        trace = np.array(info.pop("trace"))
        report.add_csv("trace.csv",
                       ["iteration", "deviation", "grad_norm"], trace)
        report.add_json("optimize_summary.json", {
            "rule": "ortho",
            "n": values["n"],
            **info,
        })
    else:
        record = max(1, values["iters"] // 1000)
        state, info = optim.train(
            a, values["n"], rule=values["rule"], delta=values["delta"],
            max_iters=values["iters"], seed=values["seed"],
            record_every=record,
        )
        trace = np.array(info.pop("trace"))
        report.add_csv("trace.csv", ["iteration", "error"], trace)
        first, second = info.pop("stationarity")
        report.add_json("optimize_summary.json", {
            "rule": values["rule"],
            "n": values["n"],
            "step_size": state.delta,
            "latent_gap_residual": first,
            "gram_gap_residual": second,
            **info,
        })
    _finish(report)


@main.command("oscillate")
@_data_options
@click.option("--n", type=int, default=None,
              help="Keep only this many coupled modes; default keeps all.")
@click.option("--delta", type=float, default=0.01, show_default=True,
              help="Time step per iteration.")
@click.option("--iters", type=int, default=1000, show_default=True,
              help="Number of composed steps.")
@_common_options
@click.pass_context
@_domain_errors
def oscillate_command(ctx, **values):
    """Propagate a random state under the Gram dynamics."""
    values, file_values = _merge_config(ctx, values)
    matrix, path = _load_matrix(values, file_values)
    a = matrix.values
    f = spectral.svd(a)
    g = a.T @ a
    rng = np.random.default_rng(values["seed"])
    n_var = a.shape[1]
    state = oscillator.OscillatorState(
        p=rng.standard_normal(n_var),
        q=rng.standard_normal(n_var) / max(float(f.lambdas[0]), 1.0),
    )
    n_keep = values["n"]
    rows = []
    energy0 = oscillator.hamiltonian(state, g)
    for step_index in range(values["iters"]):
        if n_keep is None:
            state = oscillator.propagate(state, g, values["delta"])
            noise = 0.0
        else:
            state, noise, _ = oscillator.truncated_propagate(
                state, f, n_keep, values["delta"]
            )
        rows.append((
            step_index + 1,
            state.t,
            oscillator.hamiltonian(state, g),
            noise,
        ))
    curve = np.array([
        (n, oscillator.r_squared(f, n)) for n in range(1, f.m_rank + 1)
    ])
    report = Report(values["out_dir"], "oscillate", values["seed"],
                    _config_for_manifest(values, path))
    report.add_csv("trajectory.csv",
                   ["step", "time", "energy", "noise_energy"],
                   np.array(rows))
    report.add_csv("r_squared.csv", ["n", "r_squared"], curve)
    final_energy = rows[-1][2] if rows else energy0
    report.add_json("oscillate_summary.json", {
        "steps": values["iters"],
        "time_step": values["delta"],
        "kept_modes": n_keep,
        "energy_initial": energy0,
        "energy_final": final_energy,
        "energy_drift": abs(final_energy - energy0),
    })
    _finish(report)


def _check_gram_projection():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((12, 5))
    pair = gram.projections(a)
    assert np.allclose(pair.p_prime @ pair.p_prime, pair.p_prime, atol=1e-10)
    assert np.allclose(pair.p_prime @ a, a, atol=1e-10)
    assert abs(np.trace(pair.p_prime) - pair.pseudo_rank) < 1e-8


def _check_conjugate_identity():
    rng = np.random.default_rng(12)
    a = rng.standard_normal((9, 4))
    left, _ = gram.conjugate_matrices(a)
    assert np.allclose(left.T @ a, np.eye(4), atol=1e-8)


def _check_svd_reconstruction():
    rng = np.random.default_rng(13)
    a = rng.standard_normal((8, 6))
    f = spectral.svd(a)
    assert np.allclose((f.v * f.lambdas) @ f.w.T, a, atol=1e-10)


def _check_whitening():
    rng = np.random.default_rng(14)
    a = rng.standard_normal((10, 4))
    f = spectral.svd(a)
    white = spectral.whiten(a, f)
    assert np.allclose(white.T @ white, np.eye(f.m_rank), atol=1e-10)


def _check_truncation_energy():
    rng = np.random.default_rng(15)
    a = rng.standard_normal((7, 5))
    f = spectral.svd(a)
    x_hat, tail = dimred.truncate(f, 2)
    assert abs(dimred.recon_error(a, x_hat) - tail) < 1e-10


def _check_orthonormal_latent():
    rng = np.random.default_rng(16)
    a = rng.standard_normal((9, 6))
    f = spectral.svd(a)
    rot = dimred.random_rotation(3, 17)
    ws = dimred.scenario_weights(f, 3, "d", rot)
    y = a @ ws.w1
    assert np.linalg.norm(y.T @ y - np.eye(3)) < 1e-10


def _check_duality():
    rng = np.random.default_rng(18)
    a = rng.standard_normal((8, 6))
    residuals = dimred.duality_check(a, 3, dimred.random_rotation(3, 19))
    assert max(residuals.values()) < 1e-10 * np.linalg.norm(a)


def _check_gradients():
    rng = np.random.default_rng(20)
    a = rng.standard_normal((6, 4))
    w1 = rng.standard_normal((4, 2))
    w2 = rng.standard_normal((2, 4))
    g1, g2 = optim.grad(a, w1, w2)
    h = 1e-6
    w1h = w1.copy()
    w1h[1, 1] += h
    w1l = w1.copy()
    w1l[1, 1] -= h
    numeric = (optim.error(a, w1h, w2) - optim.error(a, w1l, w2)) / (2 * h)
    assert abs(numeric - g1[1, 1]) < 1e-5 * max(1.0, abs(numeric))


def _check_tied_first_order():
    rng = np.random.default_rng(21)
    a = rng.standard_normal((6, 4))
    w1 = rng.standard_normal((4, 2)) * 0.1
    delta = 1e-3
    two_term = optim.tied_two_term_update(a, w1, delta)
    x_hat = (a @ w1) @ w1.T
    gap = x_hat - a
    gram_form = -delta * ((x_hat.T @ x_hat - a.T @ a) @ w1)
    correction = delta * (gap.T @ gap @ w1)
    assert np.allclose(two_term - gram_form, correction, atol=1e-12)


def _check_fermi_identity():
    grid = np.linspace(-6.0, 6.0, 41)
    lhs = statmech.fermi_logistic(grid, 1.0, 0.0)
    rhs = 0.5 * (1.0 + np.tanh(grid / 2.0))
    assert np.max(np.abs(lhs - rhs)) < 1e-14


def _check_bose_partial_sum():
    alpha, beta, energy = -1.0, 1.0, 0.5
    closed = statmech.occupation(
        statmech.StatEnsemble("bose", alpha, beta), energy
    )
    weight = np.exp(alpha - beta * energy)
    j = np.arange(200)
    partial = float(np.sum(j * weight**j) / np.sum(weight**j))
    assert abs(closed - partial) < 1e-6 * max(abs(partial), 1e-12)


def _check_oscillator_energy():
    rng = np.random.default_rng(22)
    a = rng.standard_normal((6, 4))
    g = a.T @ a
    state = oscillator.OscillatorState(
        p=rng.standard_normal(4), q=rng.standard_normal(4)
    )
    e0 = oscillator.hamiltonian(state, g)
    for _ in range(50):
        state = oscillator.propagate(state, g, 0.1)
    assert abs(oscillator.hamiltonian(state, g) - e0) < 1e-10 * max(e0, 1.0)


def _check_entropy_solver():
    sol = statmech.boltzmann_from_entropy(
        np.array([0.0, 1.0]), np.array([1.0, 1.0]), 1.0, 0.5
    )
    assert np.allclose(sol.densities, [0.5, 0.5], atol=1e-8)


_SELFTESTS = [
    ("projector idempotent and reproducing", _check_gram_projection),
    ("conjugate observations invert the matrix", _check_conjugate_identity),
    ("spectral factors reconstruct the matrix", _check_svd_reconstruction),
    ("whitened mappings are orthonormal", _check_whitening),
    ("truncation error equals discarded energy", _check_truncation_energy),
    ("orthonormal scenario latent Gram is the identity",
     _check_orthonormal_latent),
    ("cross-space duality residuals vanish", _check_duality),
    ("analytic gradient matches finite differences", _check_gradients),
    ("tied step forms agree up to the quadratic correction",
     _check_tied_first_order),
    ("logistic occupation matches its half-tanh form",
     _check_fermi_identity),
    ("bose occupation matches its partial-sum form",
     _check_bose_partial_sum),
    ("propagation conserves the quadratic energy",
     _check_oscillator_energy),
    ("entropy maximization recovers the flat two-level split",
     _check_entropy_solver),
]


@main.command("selftest")
def selftest_command():
    """Run the built-in property checks and report one line each."""
    failures = 0
    for index, (name, check) in enumerate(_SELFTESTS, start=1):
        try:
            check()
        except Exception as exc:
            failures += 1
            click.echo("FAIL %2d %s (%s)" % (index, name, exc))
        else:
            click.echo("ok   %2d %s" % (index, name))
    if failures:
        raise click.ClickException("%d of %d checks failed"
                                   % (failures, len(_SELFTESTS)))
    click.echo("all %d checks passed" % len(_SELFTESTS))


if __name__ == "__main__":
    main()

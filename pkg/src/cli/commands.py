"""
Interfaz de línea de comandos: síntesis del dataset, entrenamiento,
simulación mental, entrenamiento sensorial, ERS, verificación de gradientes
y análisis, todo sobre los formatos de archivo compartidos.

Códigos de salida: 0 éxito, 2 uso/configuración, 3 divergencia numérica,
4 error de E/S.
"""

import argparse
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from colorama import Fore, Style, init
from pydantic import ValidationError

from analysis.intent import classify_inferred_intent, reference_states, top_vectors
from analysis.metrics import error_metrics
from analysis.pca import project_activations, project_initial_states
from cli.outputs import ensure_output_dir, ensure_output_file, read_generation, write_generation
from config.networkConfig import ErsConfig, TrainConfig, load_network_config
from config.settings import get_settings
from data.coding import CodingConfig
from data.datasetIO import load_dataset, save_dataset
from data.gestureSynth import (GestureDataset, GestureDatasetSynthesizer, SequencePair,
                               home_io, load_gesture_config, make_test_stream)
from inference.errorRegression import prepare_stream, read_state_sidecar, run_ers, write_ers_outputs
from network.checkpoint import Checkpoint, load_checkpoint
from network.dynamics import open_loop_rollout, unroll, zero_state
from network.errors import ConfigurationError, VisuoMotorError
from training.gradCheck import grad_check
from training.trainer import train

init(autoreset=True)

logger = logging.getLogger(__name__)

ANALYZE_MODES = ("pca", "metrics", "intent", "activations")


# ==========================
# Utilidades
# ==========================
def _out_dir(value: Optional[str], command: str) -> Path:
    if value:
        return ensure_output_dir(Path(value))
    return ensure_output_dir(get_settings().output_dir / command)


def _coding(ckpt: Checkpoint) -> CodingConfig:
    if ckpt.coding is not None:
        return ckpt.coding
    cfg = ckpt.config
    return CodingConfig(groups=cfg.proprio_groups, units=cfg.units_per_group)


def _parse_ids(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"lista de primitivas inválida: {text}") from e


def resolve_subset(text: Optional[str], gestures) -> Optional[List[int]]:
    """
    "desk" -> desk_subset; "0,4,9" -> esos ids; "N" -> las primeras N primitivas
    en el orden desk_subset seguido del resto de la taxonomía.
    """
    if text is None:
        return None
    if text == "desk":
        return list(gestures.desk_subset)
    if "," in text:
        return _parse_ids(text)
    try:
        count = int(text)
    except ValueError as e:
        raise ConfigurationError(f"--subset inválido: {text}") from e
    ordered = list(gestures.desk_subset) + [p.id for p in gestures.primitives
                                             if p.id not in gestures.desk_subset]
    if not 1 <= count <= len(ordered):
        raise ConfigurationError(f"--subset {count} fuera de [1, {len(ordered)}]")
    return ordered[:count]


def _select_sequence(dataset: GestureDataset, sequence_id: Optional[int]) -> SequencePair:
    if sequence_id is not None:
        return dataset.by_id(sequence_id)
    for seq in dataset:
        if seq.schedule is not None:
            return seq
    return dataset.sequences[0]


def _gestures_for(ckpt: Checkpoint):
    cfg = ckpt.config
    return load_gesture_config(image_height=cfg.image_height, image_width=cfg.image_width,
                               coding=_coding(ckpt))


# ==========================
# Subcomandos
# ==========================
def cmd_synth(args) -> int:
    out = ensure_output_file(Path(args.out))
    network = load_network_config(args.preset)
    gestures = load_gesture_config(image_height=network.image_height, image_width=network.image_width)
    synthesizer = GestureDatasetSynthesizer(seed=args.seed, steps=args.steps, config=gestures,
                                            output_dir=out.parent)
    dataset = synthesizer.synthesize(resolve_subset(args.subset, gestures))
    if args.stream:
        stream = make_test_stream(dataset, _parse_ids(args.stream), jitter=args.jitter, seed=args.seed)
        dataset = GestureDataset([stream], dataset.coding, dataset.image_height, dataset.image_width,
                                 meta=dict(dataset.meta, stream=args.stream, jitter=str(args.jitter)))
        print(f"🔀 Flujo de prueba de {stream.steps} pasos con primitivas {args.stream}")
    size = save_dataset(out, dataset)
    print(synthesizer.generate_summary_report())
    print(Fore.GREEN + f"💾 Dataset guardado en {out} ({size} bytes)")
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(Path(args.data))
    network = load_network_config(args.preset)
    config = TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=args.seed,
                         checkpoint_every=args.checkpoint_every,
                         weight_visual=args.weight_v, weight_proprio=args.weight_p)
    out = _out_dir(args.out, "train")
    print(Fore.CYAN + f"🧠 Entrenando '{network.name}' con {len(dataset)} secuencias durante {config.epochs} épocas")
    result = train(dataset, config, network, out_dir=out, coding=dataset.coding,
                   progress=not args.quiet)
    first, last = result.history["E"].iloc[0], result.history["E"].iloc[-1]
    print(Fore.GREEN + f"✅ E inicial {first:.6g} -> final {last:.6g}; checkpoint en {out / 'checkpoint.pvmd'}")
    return 0


def cmd_simulate(args) -> int:
    ckpt = load_checkpoint(Path(args.ckpt))
    params = ckpt.params
    coding = _coding(ckpt)
    frame, code = home_io(_gestures_for(ckpt))
    out = _out_dir(args.out, "simulate")
    ids = params.sequence_ids if args.primitive == "all" else _parse_ids(args.primitive)
    for pid in ids:
        state = params.initial_state([ckpt.sequence_index(pid)])
        roll = unroll(params, state, (frame, code), args.steps)
        v_out, p_out = roll.outputs()
        write_generation(out / f"primitive_{pid:02d}", v_out[0], p_out[0], coding)
        print(Fore.GREEN + f"🎞️ Primitiva {pid}: {args.steps} pasos en lazo cerrado")
    return 0


def _entrain_outputs(ckpt: Checkpoint, seq: SequencePair, entrain: str):
    params = ckpt.params
    frames, codes = prepare_stream(seq.frames, seq.codes, params)
    roll = open_loop_rollout(params, zero_state(params), (frames[None], codes[None]), entrain)
    v_out, p_out = roll.outputs()
    return v_out[0], p_out[0], roll


def cmd_entrain(args) -> int:
    ckpt = load_checkpoint(Path(args.ckpt))
    seq = _select_sequence(load_dataset(Path(args.data)), args.sequence)
    out = _out_dir(args.out, "entrain")
    v_out, p_out, _ = _entrain_outputs(ckpt, seq, args.modality)
    write_generation(out, v_out, p_out, _coding(ckpt))
    print(Fore.GREEN + f"📡 Entrenamiento sensorial ({args.modality}) de {seq.steps} pasos en {out}")
    return 0


def cmd_ers(args) -> int:
    ckpt = load_checkpoint(Path(args.ckpt))
    seq = _select_sequence(load_dataset(Path(args.stream)), args.sequence)
    config = ErsConfig(window=args.window, iterations=args.iters, learning_rate=args.lr,
                       modality=args.modality)
    out = _out_dir(args.out, "ers")
    result = run_ers(ckpt.params, seq.frames, seq.codes, config, progress=not args.quiet)
    write_generation(out, result.v_out, result.p_out, _coding(ckpt))
    trace_path, states_path = write_ers_outputs(result, out)
    if seq.schedule is not None:
        pd.DataFrame({"t": np.arange(seq.steps), "primitive": seq.schedule}).to_csv(
            out / "schedule.csv", index=False)
    mean_final = result.trace["loss_final"].mean()
    print(Fore.GREEN + f"🔍 ERS ({config.modality}, W={config.window}, {config.iterations} iteraciones): "
                       f"pérdida final media {mean_final:.6g}")
    print(f"   traza: {trace_path}   estados: {states_path}")
    return 0


def cmd_gradcheck(args) -> int:
    network = load_network_config(args.preset)
    report = grad_check(network, seed=args.seed, eps=args.eps, tolerance=args.tol,
                        steps=args.steps, sequences=args.sequences)
    table = report.to_frame()
    print(Style.BRIGHT + f"🧮 Verificación de gradientes ({network.name}, eps={args.eps})")
    for _, row in table.iterrows():
        color = Fore.GREEN if row["rel_error"] < args.tol else Fore.RED
        print(color + f"   {row['tensor']:<14} {row['rel_error']:.3e}")
    if args.out:
        path = ensure_output_file(Path(args.out))
        table.to_csv(path, index=False)
    if not report.passed:
        print(Fore.RED + f"❌ error máximo {report.max_error:.3e} en {report.worst()} (tolerancia {args.tol:.1e})")
        return 3
    print(Fore.GREEN + f"✅ error máximo {report.max_error:.3e} < {args.tol:.1e}")
    return 0


def _analyze_pca(args, out: Path):
    ckpt = load_checkpoint(Path(args.ckpt))
    frames = project_initial_states(ckpt.params, k=args.k, out_dir=out)
    if args.plot:
        from visualization.plots import plot_pca_scatter
        for layer, frame in frames.items():
            plot_pca_scatter(frame, out / f"initial_states_{layer}.png", title=f"estados iniciales {layer}")
    print(Fore.GREEN + f"📈 PCA de estados iniciales ({ckpt.params.n_sequences} primitivas) en {out}")


def _analyze_activations(args, out: Path):
    if not args.data:
        raise ConfigurationError("--mode activations requiere --data con el flujo de prueba")
    ckpt = load_checkpoint(Path(args.ckpt))
    params = ckpt.params
    frame, code = home_io(_gestures_for(ckpt))
    seq = _select_sequence(load_dataset(Path(args.data)), args.sequence)
    steps = args.steps or seq.steps
    layers = ("vs", "ps", "pf")

    state = params.initial_state(np.arange(params.n_sequences))
    batch = params.n_sequences
    first = (np.repeat(frame[None, None], batch, axis=0), np.repeat(code[None], batch, axis=0))
    train_roll = unroll(params, state, first, steps)
    train_acts = {n: train_roll.activations(n).reshape(-1, train_roll.activations(n).shape[-1]) for n in layers}
    train_labels = np.repeat(params.sequence_ids, steps).tolist()

    _, _, test_roll = _entrain_outputs(ckpt, seq, "vision")
    test_acts = {n: test_roll.activations(n)[0] for n in layers}
    test_labels = seq.schedule.tolist() if seq.schedule is not None else None

    frames = project_activations(train_acts, test_acts, layers, k=args.k, fit=args.fit, out_dir=out,
                                 train_labels=train_labels, test_labels=test_labels)
    if args.plot:
        from visualization.plots import plot_pca_scatter
        for layer, table in frames.items():
            plot_pca_scatter(table, out / f"activations_{layer}.png", hue="label", title=f"activaciones {layer}")
    print(Fore.GREEN + f"📈 PCA de activaciones ({', '.join(layers)}, ajuste {args.fit}) en {out}")


def _analyze_metrics(args, out: Path):
    if not (args.trace and args.data):
        raise ConfigurationError("--mode metrics requiere --trace (directorio de salidas) y --data")
    pred_frames, pred_codes = read_generation(Path(args.trace))
    dataset = load_dataset(Path(args.data))
    seq = _select_sequence(dataset, args.sequence)
    steps = min(len(pred_codes), seq.steps - 1)
    if steps < 1:
        raise ConfigurationError("no hay pasos para comparar")
    # la salida del paso t predice la observación t + 1
    table = error_metrics(pred_frames[:steps], pred_codes[:steps], seq.frames[1:steps + 1],
                          seq.codes[1:steps + 1], dataset.coding)
    table.to_csv(out / "metrics.csv", index=False)
    summary = table.iloc[-1]
    print(Fore.GREEN + f"📏 MSE visual medio {summary['visual_mse']:.5f}   KL media {summary['proprio_kl']:.5f}   "
                       f"error articular medio {summary['joint_abs_error_mean']:.4f}")
    if args.plot:
        from data.coding import decode_joints
        from visualization.plots import plot_joint_trajectories
        plot_joint_trajectories(decode_joints(pred_codes[:steps], dataset.coding),
                                out / "joints.png", target=seq.joints[1:steps + 1])


def _analyze_intent(args, out: Path):
    if not (args.trace and args.data):
        raise ConfigurationError("--mode intent requiere --trace (directorio de ERS) y --data")
    ckpt = load_checkpoint(Path(args.ckpt))
    seq = _select_sequence(load_dataset(Path(args.data)), args.sequence)
    if seq.schedule is None:
        raise ConfigurationError("la secuencia elegida no tiene schedule de primitivas")
    states = read_state_sidecar(Path(args.trace) / "states.f32", ckpt.params)
    ids, refs = reference_states(ckpt.params)
    result = classify_inferred_intent(top_vectors(states), ids, refs, seq.schedule,
                                      window=args.window, burn_in=args.burn_in)
    result.table.to_csv(out / "intent.csv", index=False)
    print(Fore.GREEN + f"🎯 Exactitud de la intención inferida: {result.accuracy:.3f} "
                       f"(burn-in {result.burn_in} pasos)")


def cmd_analyze(args) -> int:
    out = _out_dir(args.out, "analyze")
    needs_ckpt = args.mode in ("pca", "intent", "activations")
    if needs_ckpt and not args.ckpt:
        raise ConfigurationError(f"--mode {args.mode} requiere --ckpt")
    handler = {"pca": _analyze_pca, "metrics": _analyze_metrics,
               "intent": _analyze_intent, "activations": _analyze_activations}[args.mode]
    handler(args, out)
    return 0


# ==========================
# Parser
# ==========================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="visuomotor",
                                     description="Red predictiva visuo-propioceptiva multi-escala")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sintetiza el dataset de gestos")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--subset", default=None, help='"desk", lista de ids "0,4,9" o cantidad N')
    p.add_argument("--preset", default="table1", help="preset de red que fija el tamaño de imagen")
    p.add_argument("--stream", default=None, help="ids a concatenar en un flujo de prueba")
    p.add_argument("--jitter", type=float, default=0.02)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="entrena por BPTT con Adam")
    p.add_argument("--data", required=True)
    p.add_argument("--preset", default="desk")
    p.add_argument("--epochs", type=int, default=40000)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=1000)
    p.add_argument("--weight-v", type=float, default=1.0)
    p.add_argument("--weight-p", type=float, default=1.0)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="simulación mental en lazo cerrado")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--primitive", default="all", help='id, lista "0,4" o "all"')
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("entrain", help="entrenamiento sensorial en lazo abierto")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--modality", choices=("vision", "proprioception", "both"), default="vision")
    p.add_argument("--sequence", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_entrain)

    p = sub.add_parser("ers", help="inferencia en línea por regresión del error")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--modality", choices=("visual", "proprioceptive", "both"), default="visual")
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--sequence", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ers)

    p = sub.add_parser("gradcheck", help="BPTT contra diferencias finitas")
    p.add_argument("--preset", default="tiny")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--sequences", type=int, default=2)
    p.add_argument("--out", default=None, help="CSV opcional con el error por tensor")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("analyze", help="PCA, métricas e intención inferida")
    p.add_argument("--mode", choices=ANALYZE_MODES, required=True)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--trace", default=None, help="directorio de salidas de simulate/entrain/ers")
    p.add_argument("--data", default=None)
    p.add_argument("--sequence", type=int, default=None)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--fit", choices=("train", "joint"), default="train")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--window", type=int, default=30)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--plot", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Ejecuta un subcomando y devuelve su código de salida"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except VisuoMotorError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(Fore.RED + f"❌ {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error("argumentos inválidos: %s", e)
        print(Fore.RED + f"❌ argumentos inválidos: {e}")
        return 2
    except OSError as e:
        logger.error("error de E/S: %s", e)
        print(Fore.RED + f"❌ error de E/S: {e}")
        return 4

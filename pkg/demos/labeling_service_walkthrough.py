"""Walk through the labeling-session layer without the HTTP server.

Creates a session with catch trials and a qualification rule, runs an
honest worker (with a deliberate "bright top half" bias) and a careless
worker who answers yes to everything, and shows that:

  * catch trials are scheduled and graded invisibly,
  * the careless worker never qualifies, so their answers never touch
    the estimated template,
  * the template becomes available once a qualified worker has both
    yes and no answers on record, and
  * reloading the session from disk reproduces the exact same state.

Run:  python3 demos/labeling_service_walkthrough.py
"""

import os
import shutil

import numpy as np

from noisebias.errors import EstimationError
from noisebias.features import FeatureSpace
from noisebias.session import (CatchSource, LabelingSession,
                               QualificationRule, SessionConfig,
                               list_sessions)

OUT_DIR = os.path.normpath(
    os.path.join(os.path.dirname(__file__), "..", "demo-output"))
DATA_DIR = os.path.join(OUT_DIR, "labeling-data")


def honest_answer(stim) -> str:
    """Truthful on catch trials; a top-heavy brightness bias on noise."""
    if stim.is_catch:
        return "yes" if stim.true_class == "A" else "no"
    pixels = stim.vector.values
    top, bottom = pixels[: pixels.size // 2], pixels[pixels.size // 2:]
    return "yes" if top.mean() > bottom.mean() else "no"


def run_worker(session, worker, answer) -> None:
    while True:
        stim = session.next_stimulus(worker)
        if stim is None:
            break
        session.submit_label(worker, stim.stimulus_id, answer(stim))


def main():
    shutil.rmtree(DATA_DIR, ignore_errors=True)
    os.makedirs(DATA_DIR, exist_ok=True)

    space = FeatureSpace.raw_pixel("demo-pix-8x8", 8, 8)
    config = SessionConfig(
        session_id="walkthrough",
        space=space,
        category_name="wug",
        n_target_trials=60,
        scales=(1, 2, 4),
        catch_rate=0.2,
        catch_pool=(
            CatchSource("A", seed=9001),
            CatchSource("B", seed=9002),
            CatchSource("A", seed=9003),
            CatchSource("B", values=np.linspace(-1.0, 1.0, 64)),
        ),
        qualification=QualificationRule(min_catch_seen=3,
                                        min_catch_accuracy=0.8),
        seed=7,
    )
    session = LabelingSession.create(config, DATA_DIR)
    print(f"created session {config.session_id!r} "
          f"(category {config.category_name!r}, "
          f"{config.n_target_trials} trials per worker, "
          f"1 catch trial every {config.catch_period})")
    print(f"sessions on disk: {list_sessions(DATA_DIR)}\n")

    try:
        session.current_template()
    except EstimationError as e:
        print(f"template before any labels: not ready ({e})\n")

    print("worker 'alice' labels honestly, preferring bright top halves ...")
    run_worker(session, "alice", honest_answer)
    print(f"  status: {session.worker_status('alice')}")

    print("worker 'bob' answers yes to every stimulus ...")
    run_worker(session, "bob", lambda stim: "yes")
    print(f"  status: {session.worker_status('bob')}")
    print(f"qualified workers: {session.qualified_workers()} "
          "— bob failed half his catch trials, so he is excluded\n")

    template, glyph = session.current_template()
    top = template.values[:32].mean()
    bottom = template.values[32:].mean()
    print(f"template over qualified workers: {template.trials_used} noise "
          f"trials, mean weight {top:+.4f} (top half) vs {bottom:+.4f} "
          "(bottom half) — alice's bias, recovered")
    glyph_path = os.path.join(OUT_DIR, "session_template.png")
    glyph.save_png(glyph_path)
    print(f"wrote {glyph_path}")

    n_lines = sum(1 for _ in session.iter_export_lines())
    print(f"export stream carries {n_lines} trial records "
          "(responses only; catch bookkeeping stays server-side)\n")
    session.close()

    reloaded = LabelingSession.load(DATA_DIR, "walkthrough")
    template2, _ = reloaded.current_template()
    same = (template2.values == template.values).all()
    print("reloaded the session from its config and trial log alone:")
    print(f"  worker status preserved: {reloaded.worker_status('alice')}")
    print(f"  template bit-identical after reload: {bool(same)}")
    reloaded.close()


if __name__ == "__main__":
    main()

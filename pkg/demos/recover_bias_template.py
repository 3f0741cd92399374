"""Recover a simulated observer's internal template from noise labels.

A linear observer with a hidden HOG-space template answers "do you see
the target?" for pure noise stimuli.  Averaging the noise conditioned on
the answer recovers the hidden template; this script shows the estimate
sharpening as trials accumulate, then renders it as a glyph image.

Run:  python3 demos/recover_bias_template.py
"""

import os

import numpy as np

from noisebias import rng
from noisebias.features import (FeatureSpace, FeatureVector, l2_normalize,
                                render_for_labeling, vector_record,
                                write_vector_jsonl)
from noisebias.observer import LinearObserver, run_session
from noisebias.revcorr import (TemplateAccumulator, accumulate,
                               estimate_noise_only, reconstruct_stimulus)

OUT_DIR = os.path.normpath(
    os.path.join(os.path.dirname(__file__), "..", "demo-output"))


def hidden_template(space: FeatureSpace) -> FeatureVector:
    """A structured preference: vertical energy left, horizontal right."""
    grid = np.zeros((space.cells_y, space.cells_x, space.orientations))
    grid[:, : space.cells_x // 2, 0] = 1.0                      # vertical
    grid[:, space.cells_x // 2:, space.orientations // 2] = 1.0  # horizontal
    return l2_normalize(FeatureVector(space.id, grid.reshape(-1)))


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    space = FeatureSpace.hog("demo-hog-6x6", cells_x=6, cells_y=6,
                             orientations=6, cell_size_px=8)
    template = hidden_template(space)
    observer = LinearObserver(template=template, sigma=1.0, tau=0.0,
                              seed=rng.mix_seeds(2, "observer-noise"))

    n_trials = 20_000
    print(f"simulating {n_trials} noise-labeling trials in a "
          f"{space.dimension}-dim HOG space ...")
    records = run_session(observer, space, n_trials,
                          rng.mix_seeds(2, "stimuli"))

    checkpoints = [500 * 2**k for k in range(6)] + [n_trials]
    acc = TemplateAccumulator.empty(space)
    print(f"{'trials':>8}  cosine(estimate, hidden template)")
    for i, rec in enumerate(records, start=1):
        acc = accumulate(acc, rec, reconstruct_stimulus(rec, space))
        if i in checkpoints:
            est = estimate_noise_only(acc)
            cosine = float(est.values @ template.values
                           / np.linalg.norm(est.values))
            print(f"{i:>8}  {cosine:.4f}")

    final = estimate_noise_only(acc)
    template_path = os.path.join(OUT_DIR, "recovered_template.jsonl")
    write_vector_jsonl(template_path, [vector_record(
        "recovered", space.id, final.values,
        trials_used=final.trials_used, space_def=space.to_dict())])

    glyph = render_for_labeling(final.as_vector(), space, scale=24)
    glyph_path = os.path.join(OUT_DIR, "recovered_template.png")
    glyph.save_png(glyph_path)
    truth = render_for_labeling(template, space, scale=24)
    truth_path = os.path.join(OUT_DIR, "hidden_template.png")
    truth.save_png(truth_path)

    print(f"\nwrote {template_path}")
    print(f"wrote {glyph_path} (estimate) and {truth_path} (ground truth) — "
          "compare them side by side")


if __name__ == "__main__":
    main()

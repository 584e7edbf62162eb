"""Static SVG charts of a trajectory: body rates, wheel speeds, attitude."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sim_engine import Trajectory  # noqa: E402

# fixed salt and no date stamp so identical input gives identical bytes
_RC = {"svg.hashsalt": "desatlqr", "svg.fonttype": "none"}

_FIGURES = (
    ("rates.svg", "Body rate response", "w", ("w1", "w2", "w3"), "body rate (rad/s)"),
    ("wheels.svg", "Reaction wheel response", "Om", ("Omega1", "Omega2", "Omega3"), "wheel speed (rad/s)"),
    ("attitude.svg", "Attitude response", "q", ("q1", "q2", "q3"), "quaternion component (-)"),
)


def write_plots(traj: Trajectory, out_dir):
    """Write ``rates.svg``, ``wheels.svg`` and ``attitude.svg``; returns their paths."""
    out_dir = Path(out_dir)
    paths = []
    single = len(traj) == 1
    with matplotlib.rc_context(_RC):
        for fname, title, attr, labels, ylabel in _FIGURES:
            data = getattr(traj, attr)
            fig, ax = plt.subplots(figsize=(7.0, 4.0))
            for j, lab in enumerate(labels):
                ax.plot(traj.t, data[:, j], marker="o" if single else None, label=lab)
            ax.set_title(title)
            ax.set_xlabel("time (s)")
            ax.set_ylabel(ylabel)
            ax.grid(True, alpha=0.3)
            ax.legend(loc="best")
            fig.tight_layout()
            path = out_dir / fname
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths

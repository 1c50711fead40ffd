"""Optional SVG plots of window signals; requires matplotlib."""

from pathlib import Path

from .features import window_signals

PLOTTED = ("steering_wheel_angle", "vehicle_speed", "accelerator_pedal_position", "heading_delta")


def plot_window(window, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    signals = window_signals(window)
    t = window.frames.timestamps - window.t_label
    fig, axes = plt.subplots(len(PLOTTED), 1, figsize=(6, 8), sharex=True)
    for ax, name in zip(axes, PLOTTED):
        ax.plot(t, signals[name], lw=1)
        ax.set_ylabel(name.replace("_", " "), fontsize=7)
        ax.grid(alpha=0.3)
    axes[0].set_title(f"{window.label.value} @ {window.t_label!r}")
    axes[-1].set_xlabel("time from label [s]")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path

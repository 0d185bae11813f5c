"""Background replacement for video with latent diffusion.

Arrays are numpy: clips are float32 (frames, height, width, 3), masks are
(frames, height, width) with 1 marking foreground, latents are float64
(frames, h, w, channels).
"""

from ._core import (
    BackendError,
    ConfigError,
    Error,
    IOError,
    NoiseSchedule,
    ToyCodec,
    add_noise,
    bg_psnr,
    cross_frame_attention,
    ddim_step,
    fg_hf_corr,
    gaussian_blur,
    laplacian_fill,
    load_clip,
    load_mask,
    make_fixture,
    make_schedule,
    pred_x0,
    project,
    refine,
    resolve_config,
    run_pipeline,
    save_clip,
    self_attention,
    split_bands,
    steps_from_fraction,
    synthetic_background,
    tem_con,
    verify_alignment,
    write_fixture,
)

__all__ = [name for name in dir() if not name.startswith("_")]

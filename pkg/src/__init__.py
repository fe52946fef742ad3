"""
Core package for synthetic aperture sonar autofocus.

Modules:
    slc: SLC images, along-track transforms, the phase-polynomial model, DRC and file I/O.
    sharpness: MNS, ME, OSF and SSI metrics with analytic gradients.
    weighting: Weight maps applied inside the sharpness objective.
    gd_autofocus: Fixed-step gradient-descent autofocus and learning-rate cross-validation.
    scene_synth: Seeded speckle scenes and phase-error sampling.
    learned_autofocus: Learned single-pass autofocus (regressor, pipeline, training).
    iqa: Despeckling, PSNR and MS-SSIM.
    validation: Manifest and evaluation-record checks.
"""

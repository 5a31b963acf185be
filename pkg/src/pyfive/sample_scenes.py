"""Functions to create some sample test scenes"""

from .scene import SceneSpec, generate_scene


def default_scene(seed=0):
    """Four microphones, ten interferers, 5 dB input SINR, time-varying Gaussian target.
    64 bins by 500 frames, mixed instantaneously in each bin."""
    return generate_scene(SceneSpec(seed=seed))


def white_background_scene(seed=0):
    """No interferers, only uncorrelated noise, so the background covariance is a multiple of I
    and the max-SINR beamformer is the matched filter."""
    return generate_scene(SceneSpec(num_interferers=0, uncorrelated_noise_fraction=1.0, seed=seed))


def single_channel_scene(seed=0):
    """One microphone. Extraction can only rescale."""
    return generate_scene(SceneSpec(num_channels=1, seed=seed))


def laplace_scene(seed=0):
    """The default scene with a Laplace-modulated target."""
    return generate_scene(SceneSpec(target_model='laplace_modulated', seed=seed))


def convolutive_scene(seed=0, num_channels=8, duration=1.0, frame_size=512):
    """Time domain mixture through random decaying FIR filters, duration seconds at 16 kHz."""
    hop = frame_size // 2
    num_frames = int((duration * 16000 - frame_size) // hop) + 1
    spec = SceneSpec(num_channels=num_channels, num_bins=frame_size // 2 + 1, num_frames=num_frames,
                     mixing='convolutive', seed=seed)
    return generate_scene(spec)


def mismatch_scene(seed=0, num_interferers=5):
    """Three microphones at 0 dB SINR. Two or more interferers already give a full rank
    background that three microphones cannot null."""
    return generate_scene(SceneSpec(num_channels=3, input_sinr_db=0.0, num_interferers=num_interferers,
                                    seed=seed))


def acceptance_batch(count=20):
    """default_scene for seeds 0 .. count - 1"""
    for seed in range(count):
        yield default_scene(seed)


scene_names = {'default': default_scene, 'white_background': white_background_scene,
               'single_channel': single_channel_scene, 'laplace': laplace_scene,
               'convolutive': convolutive_scene, 'mismatch': mismatch_scene}


def get_scene_fun(name):
    """Find the factory function based on the scene name"""
    if name in scene_names:
        return scene_names[name]
    for scene_name in scene_names.keys():
        if scene_name.startswith(name):
            return scene_names[scene_name]
    raise ValueError("Unknown scene {}".format(name))


__all__ = ['default_scene', 'white_background_scene', 'single_channel_scene', 'laplace_scene',
           'convolutive_scene', 'mismatch_scene', 'acceptance_batch', 'scene_names', 'get_scene_fun']

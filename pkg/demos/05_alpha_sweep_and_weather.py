"""Scale-up factors 3, 6 and 12, and the effect of weather inputs.

Each experiment reruns the whole pipeline, so the settings here are small (a few minutes on one core);
the same calls power the ``sweep-alpha`` and ``ablate-weather`` commands.

Run:  python demos/05_alpha_sweep_and_weather.py
"""
from loadsr.networks import GeneratorConfig, init_params
from loadsr.training import RunConfig, ablate_weather, sweep_alpha
import numpy as np

for alpha in (3, 6, 12):
    cfg = GeneratorConfig.for_alpha(alpha)
    print(f"alpha={alpha:2d}: upsampling strides {cfg.stages}, LR length {288 // alpha}")

rng = np.random.default_rng(0)
plain = init_params(GeneratorConfig(), rng).count()
weather = init_params(GeneratorConfig(weather_channels=5), rng).count()
print(f"weather adds {weather - plain} parameters, all in the first convolution")

cfg = RunConfig.desk(n_days=400, epochs_gan=12, epochs_polish=4, gen_features=16, pol_features=8)
for alpha, report in sweep_alpha(cfg, (3, 6, 12)).items():
    means = report.means["GAN-polished"]
    print(f"alpha={alpha:2d}: polished MSE {means['mse']:.3f}, FCE {means['fce']:.3f}, "
          f"LERP MSE {report.means['LERP']['mse']:.3f}")

print("\nweather ablation:")
print(ablate_weather(cfg).table())

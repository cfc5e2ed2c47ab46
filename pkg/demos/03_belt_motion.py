"""Estimate belt motion from rendered frames and label each frame pair.

Frames are rendered from a short simulated run whose belt stops and then
reverses. Block matching recovers the per-frame displacement, which is
classified as Forward, Stopped or Reversed.
"""

from catchcomp import SimConfig, StopEvent, generate_scenario
from catchcomp.motion import MotionConfig, classify_belt_state, estimate_flow
from catchcomp.sim import belt_texture, render_frame

cfg = SimConfig(seed=3, fish_count={"SKJ": 2}, frame_size=(320, 180),
                fish_length=(40, 60), stop_events=(StopEvent(6, 3), StopEvent(9, 3, reverse=True)))
scenario = generate_scenario(cfg)
texture = belt_texture(cfg.seed, height=cfg.frame_size[1])
mcfg = MotionConfig(grid_step=48, search_radius=10)

frames = [render_frame(scenario, t, texture) for t in range(14)]
print("frame  true dx  estimated (dx, dy)  state")
for t in range(1, len(frames)):
    flow = estimate_flow(frames[t - 1], frames[t], mcfg)
    print(f"{t:5d}  {scenario.flows[t].dx:7.1f}  ({flow.dx:5.1f}, {flow.dy:4.1f})"
          f"        {classify_belt_state(flow, mcfg)}")

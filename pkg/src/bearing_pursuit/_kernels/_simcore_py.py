"""Pure-Python physics inner loop (fallback backend).

Mirrors ``_simcore.pyx`` statement for statement: identical operation
order so both backends produce bit-identical trajectories.  Any change
here must be replicated in the compiled kernel.
"""

from math import cos, fmod, pi, sin, sqrt


def step_agents(
    p,          # (n, 2) float64, in-place
    v,          # (n, 2) float64, in-place
    theta,      # (n,)  float64, in-place
    omega,      # (n,)  float64, in-place
    radius,     # (n,)  float64
    mass,       # (n,)  float64
    unicycle,   # (n,)  uint8, 1 = lateral command zeroed
    cmd,        # (n, 3) float64: v_h, v_x, v_y (pre-clipped, body frame)
    collided,   # (n,)  uint8, in-place; set 1 on any agent-agent overlap
    k_v, k_omega, k_agent, k_wall,
    xmin, xmax, ymin, ymax,
    dt, n_substeps,
):
    n = p.shape[0]
    fx = [0.0] * n
    fy = [0.0] * n

    for _ in range(n_substeps):
        for i in range(n):
            fx[i] = 0.0
            fy[i] = 0.0

        # Hooke's-law agent-agent contacts, equal and opposite.
        for i in range(n):
            for j in range(i + 1, n):
                dx = p[i, 0] - p[j, 0]
                dy = p[i, 1] - p[j, 1]
                rsum = radius[i] + radius[j]
                d2 = dx * dx + dy * dy
                if d2 < rsum * rsum:
                    d = sqrt(d2)
                    if d > 1e-12:
                        nx = dx / d
                        ny = dy / d
                    else:
                        nx = 1.0
                        ny = 0.0
                    pen = rsum - d
                    gx = k_agent * pen * nx
                    gy = k_agent * pen * ny
                    fx[i] += gx
                    fy[i] += gy
                    fx[j] -= gx
                    fy[j] -= gy
                    collided[i] = 1
                    collided[j] = 1

        # Inward boundary forces on disc penetration depth.
        for i in range(n):
            lo = p[i, 0] - radius[i]
            hi = p[i, 0] + radius[i]
            if lo < xmin:
                fx[i] += k_wall * (xmin - lo)
            if hi > xmax:
                fx[i] -= k_wall * (hi - xmax)
            lo = p[i, 1] - radius[i]
            hi = p[i, 1] + radius[i]
            if lo < ymin:
                fy[i] += k_wall * (ymin - lo)
            if hi > ymax:
                fy[i] -= k_wall * (hi - ymax)

        # First-order velocity lag toward the commanded body-frame
        # velocity, then semi-implicit Euler.
        for i in range(n):
            vdx = cmd[i, 1]
            if unicycle[i]:
                vdy = 0.0
            else:
                vdy = cmd[i, 2]
            c = cos(theta[i])
            s = sin(theta[i])
            ax = k_v * ((c * vdx - s * vdy) - v[i, 0])
            ay = k_v * ((s * vdx + c * vdy) - v[i, 1])
            v[i, 0] += (ax + fx[i] / mass[i]) * dt
            v[i, 1] += (ay + fy[i] / mass[i]) * dt
            p[i, 0] += v[i, 0] * dt
            p[i, 1] += v[i, 1] * dt
            alpha = k_omega * (cmd[i, 0] - omega[i])
            omega[i] += alpha * dt
            theta[i] += omega[i] * dt
            t = fmod(theta[i] + pi, 2.0 * pi)
            if t <= 0.0:
                t += 2.0 * pi
            theta[i] = t - pi

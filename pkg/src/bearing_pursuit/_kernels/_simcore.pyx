# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled physics inner loop.

Statement-for-statement mirror of ``_simcore_py.py``; compiled with
-ffp-contract=off so both backends produce bit-identical trajectories.
"""

from libc.math cimport cos, fmod, sin, sqrt


cdef double PI = 3.141592653589793


def step_agents(
    double[:, ::1] p,
    double[:, ::1] v,
    double[::1] theta,
    double[::1] omega,
    double[::1] radius,
    double[::1] mass,
    unsigned char[::1] unicycle,
    double[:, ::1] cmd,
    unsigned char[::1] collided,
    double k_v, double k_omega, double k_agent, double k_wall,
    double xmin, double xmax, double ymin, double ymax,
    double dt, int n_substeps,
):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i, j
    cdef int step
    cdef double dx, dy, rsum, d2, d, nx, ny, pen, gx, gy
    cdef double lo, hi, vdx, vdy, c, s, ax, ay, alpha, t
    cdef double fx[16]
    cdef double fy[16]

    if n > 16:
        raise ValueError("compiled kernel supports at most 16 agents")

    for step in range(n_substeps):
        for i in range(n):
            fx[i] = 0.0
            fy[i] = 0.0

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
            t = fmod(theta[i] + PI, 2.0 * PI)
            if t <= 0.0:
                t += 2.0 * PI
            theta[i] = t - PI

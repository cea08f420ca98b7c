"""Tour of the kinematic model: constraints, both kinematic directions,
Jacobians, and the posture sensitivity table.
"""
import numpy as np

from orthocal import (
    Axis,
    Geometry,
    Posture,
    calibration_postures,
    constraint_residuals,
    direct_kinematics,
    inverse_jacobian,
    inverse_kinematics,
    posture_commanded_joints,
    posture_jacobian,
    sensitivity_table,
)

geom = Geometry.prototype()
print(f"prototype geometry: L = {geom.L} mm, joint range {geom.joint_bounds()} mm")

# Inverse kinematics: where must the actuators be to put the TCP somewhere?
p = np.array([25.0, -40.0, 10.0])
offsets = np.array([0.8, -0.3, 1.2])
rho = inverse_kinematics(p, offsets, geom)
print(f"\nTCP {p} mm with offsets {offsets} -> commanded joints {np.round(rho, 4)}")
print("constraint residuals (mm^2):", constraint_residuals(p, rho, offsets, geom))

# Direct kinematics inverts it exactly; the quadratic's second root is the
# out-of-workspace branch and stays available for inspection.
back, roots = direct_kinematics(rho, offsets, geom)
print(f"round trip error: {np.abs(back - p).max():.2e} mm")
rho_eff = rho + offsets
other = rho_eff / 2 + roots.t_plus / rho_eff
print(f"discarded branch would sit at {np.round(other, 2)} mm (outside the box)")

# At the isotropic posture the Jacobian is the identity: offsets map 1:1
# onto TCP displacement.  At displacement postures the displaced axis leaks
# into the other two with factor tan(alpha).
print("\nposture              commanded joints (mm)          TCP Jacobian column of the displaced axis")
for posture in calibration_postures():
    joints = posture_commanded_joints(posture, geom)
    J = posture_jacobian(posture, geom)
    col = J[:, posture.axis] if posture.axis is not None else np.diag(J)
    print(f"{posture.label():<22} {np.round(joints, 4)!s:<32} {np.round(col, 4)}")

# The closed-form joint sensitivity matrix inverts the posture Jacobian.
pX = Posture.max(Axis.X)
M = inverse_jacobian([geom.rho_max, 0, 0], posture_commanded_joints(pX, geom))
print("\ninverse Jacobian at the X-max posture (rows: joints, columns: TCP):")
print(np.round(M, 4))
print("product with the posture Jacobian:", np.round(M @ posture_jacobian(pX, geom), 12).tolist())

# Table of leg deviations per unit offset: the measurement signal the
# calibration methods exploit.
print("\nsensitivity of the leg deviations to offsets (1,1,1) mm:")
for row in sensitivity_table(geom, [1.0, 1.0, 1.0]):
    print(f"  {row.posture:<26} leg {row.leg.name}  plane {row.plane}:  "
          f"max {row.at_max:+.4f}  min {row.at_min:+.4f}")

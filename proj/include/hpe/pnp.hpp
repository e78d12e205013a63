#pragma once

// Perspective-n-point by Levenberg-Marquardt on reprojection error.
//
// The pose is parameterized inside the solver as a 6-vector
// (axis-angle rotation, translation). Residuals are ordered
// (du_1, dv_1, du_2, dv_2, ...) with d = projected - observed.

#include <vector>

#include <Eigen/Core>

#include "hpe/camera.hpp"

namespace hpe {

struct PnPProblem {
    std::vector<Vec3> model_points;
    std::vector<Vec2> image_points;
    CameraIntrinsics intrinsics;
};

enum class JacobianMode { analytic, numeric };

struct LMConfig {
    int max_iterations = 100;
    double initial_damping = 1e-3;
    double damping_up = 10.0;
    double damping_down = 0.1;
    double step_tolerance = 1e-10;
    /// Applied to the RMS residual (pixels).
    double residual_tolerance = 1e-12;
    JacobianMode jacobian = JacobianMode::analytic;
};

enum class SolveStatus {
    converged,
    max_iterations,
    /// The damped normal equations could not be solved; best iterate returned.
    singular,
};

struct PnPSolution {
    Pose pose;
    double rmse = 0.0;  ///< pixels, over all 2N residual components
    int iterations = 0;
    bool converged = false;
    SolveStatus status = SolveStatus::max_iterations;
};

using PoseParams = Eigen::Matrix<double, 6, 1>;
using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, 6>;

PoseParams pose_to_params(const Pose& pose);
Pose params_to_pose(const PoseParams& x);

/// Throws DegenerateProblem unless the problem has >= 4 matched, finite
/// correspondences and a centered model of rank >= 2.
void validate_problem(const PnPProblem& problem);

/// Identity rotation, translation (0, 0, 2 * bounding radius / tan(25 deg)).
Pose default_initial_pose(const PnPProblem& problem);

Eigen::VectorXd reprojection_residuals(const PnPProblem& problem, const Pose& pose);

/// Analytic 2N x 6 Jacobian of the residuals with respect to PoseParams.
Jacobian reprojection_jacobian(const PnPProblem& problem, const Pose& pose);

/// Central-difference Jacobian, step h per parameter.
Jacobian numeric_jacobian(const PnPProblem& problem, const Pose& pose, double h = 1e-6);

PnPSolution solve_pnp(const PnPProblem& problem, const Pose& init, const LMConfig& config = {});
PnPSolution solve_pnp(const PnPProblem& problem, const LMConfig& config = {});

}  // namespace hpe

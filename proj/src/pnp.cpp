#include "hpe/pnp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "hpe/errors.hpp"

namespace hpe {

namespace {

// Beyond this the damped system is treated as unsolvable.
constexpr double kMaxDamping = 1e20;

void validate_config(const LMConfig& c) {
    if (c.max_iterations <= 0 || !(c.initial_damping > 0) || !(c.step_tolerance > 0) ||
        !(c.residual_tolerance > 0) || !(c.damping_up > 1.0) ||
        !(c.damping_down > 0.0 && c.damping_down < 1.0)) {
        throw OutOfRange("invalid LM configuration");
    }
}

double squared_norm_or_inf(const PnPProblem& problem, const Pose& pose) {
    try {
        const Eigen::VectorXd r = reprojection_residuals(problem, pose);
        const double c = r.squaredNorm();
        return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
    } catch (const BehindCamera&) {
        return std::numeric_limits<double>::infinity();
    }
}

// d(R p)/d v for R = exp([v]x), column i for parameter v_i.
// Uses dR/dv_i = (v_i [v]x + [v x (I - R) e_i]x) / |v|^2 * R.
Mat3 rotated_point_derivative(const Vec3& v, const Mat3& r, const Vec3& p) {
    const Vec3 rp = r * p;
    Mat3 d;
    const double theta2 = v.squaredNorm();
    if (theta2 < 1e-16) {
        // At the identity dR/dv_i = [e_i]x, so d(Rp)/dv = -[Rp]x.
        return -skew(rp);
    }
    const Mat3 i_minus_r = Mat3::Identity() - r;
    const Mat3 sv = skew(v);
    for (int i = 0; i < 3; ++i) {
        const Mat3 g = (v(i) * sv + skew(v.cross(i_minus_r.col(i)))) / theta2;
        d.col(i) = g * rp;
    }
    return d;
}

}  // namespace

PoseParams pose_to_params(const Pose& pose) {
    PoseParams x;
    x.head<3>() = rotation_to_axis_angle(pose.rotation);
    x.tail<3>() = pose.translation;
    return x;
}

Pose params_to_pose(const PoseParams& x) {
    return Pose{axis_angle_to_rotation(x.head<3>()), x.tail<3>()};
}

void validate_problem(const PnPProblem& problem) {
    const auto n = problem.model_points.size();
    if (n != problem.image_points.size()) {
        throw DegenerateProblem("model/image point count mismatch: " + std::to_string(n) + " vs " +
                                std::to_string(problem.image_points.size()));
    }
    if (n < 4) throw DegenerateProblem("need at least 4 correspondences, got " + std::to_string(n));
    const auto& k = problem.intrinsics;
    if (!(k.fx > 0) || !(k.fy > 0) || !std::isfinite(k.cx) || !std::isfinite(k.cy)) {
        throw DegenerateProblem("intrinsics require fx > 0, fy > 0");
    }

    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), 3);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : problem.model_points) mean += p;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!problem.model_points[i].allFinite() || !problem.image_points[i].allFinite()) {
            throw DegenerateProblem("non-finite correspondence at index " + std::to_string(i));
        }
        centered.row(static_cast<Eigen::Index>(i)) = (problem.model_points[i] - mean).transpose();
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const Vec3 s = svd.singularValues();
    if (!(s(0) > 0) || s(1) <= 1e-9 * s(0)) {
        throw DegenerateProblem("model points are collinear or coincident");
    }
}

Pose default_initial_pose(const PnPProblem& problem) {
    Vec3 mean = Vec3::Zero();
    for (const auto& p : problem.model_points) mean += p;
    mean /= static_cast<double>(problem.model_points.size());
    double radius = 0.0;
    for (const auto& p : problem.model_points) radius = std::max(radius, (p - mean).norm());
    const double tan25 = std::tan(25.0 * std::numbers::pi / 180.0);
    return Pose{RotationMatrix::Identity(), Vec3(0.0, 0.0, 2.0 * radius / tan25)};
}

Eigen::VectorXd reprojection_residuals(const PnPProblem& problem, const Pose& pose) {
    const auto n = problem.model_points.size();
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 uv = project_point(pose.rotation * problem.model_points[i] + pose.translation,
                                      problem.intrinsics);
        r.segment<2>(2 * static_cast<Eigen::Index>(i)) = uv - problem.image_points[i];
    }
    return r;
}

Jacobian reprojection_jacobian(const PnPProblem& problem, const Pose& pose) {
    const auto n = problem.model_points.size();
    const auto& k = problem.intrinsics;
    const Vec3 v = rotation_to_axis_angle(pose.rotation);
    // Differentiate at the canonical parameters so J matches pose_to_params().
    const Mat3 r = axis_angle_to_rotation(v);

    Jacobian jac(2 * static_cast<Eigen::Index>(n), 6);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = problem.model_points[i];
        const Vec3 xc = r * p + pose.translation;
        if (!(xc.z() > kMinDepth)) {
            throw BehindCamera("point " + std::to_string(i) + " is not in front of the camera");
        }
        const double iz = 1.0 / xc.z();
        Eigen::Matrix<double, 2, 3> dproj;
        dproj << k.fx * iz, 0.0, -k.fx * xc.x() * iz * iz,
                 0.0, k.fy * iz, -k.fy * xc.y() * iz * iz;
        const auto row = 2 * static_cast<Eigen::Index>(i);
        jac.block<2, 3>(row, 0) = dproj * rotated_point_derivative(v, r, p);
        jac.block<2, 3>(row, 3) = dproj;
    }
    return jac;
}

Jacobian numeric_jacobian(const PnPProblem& problem, const Pose& pose, double h) {
    const PoseParams x = pose_to_params(pose);
    Jacobian jac(2 * static_cast<Eigen::Index>(problem.model_points.size()), 6);
    for (int j = 0; j < 6; ++j) {
        PoseParams xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        jac.col(j) = (reprojection_residuals(problem, params_to_pose(xp)) -
                      reprojection_residuals(problem, params_to_pose(xm))) /
                     (2.0 * h);
    }
    return jac;
}

PnPSolution solve_pnp(const PnPProblem& problem, const LMConfig& config) {
    validate_problem(problem);
    return solve_pnp(problem, default_initial_pose(problem), config);
}

PnPSolution solve_pnp(const PnPProblem& problem, const Pose& init, const LMConfig& config) {
    validate_config(config);
    validate_problem(problem);

    PoseParams x = pose_to_params(init);
    Pose pose = params_to_pose(x);
    Eigen::VectorXd residuals = reprojection_residuals(problem, pose);
    double cost = residuals.squaredNorm();
    const double count = static_cast<double>(residuals.size());

    PnPSolution sol;
    auto finish = [&](SolveStatus status, int iterations) {
        sol.pose = pose;
        sol.rmse = std::sqrt(cost / count);
        sol.iterations = iterations;
        sol.status = status;
        sol.converged = status == SolveStatus::converged;
        return sol;
    };

    auto small_residual = [&] { return std::sqrt(cost / count) <= config.residual_tolerance; };
    if (small_residual()) return finish(SolveStatus::converged, 0);

    double lambda = config.initial_damping;
    bool need_jacobian = true;
    Eigen::Matrix<double, 6, 6> jtj;
    PoseParams jtr;

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        if (need_jacobian) {
            const Jacobian jac = config.jacobian == JacobianMode::analytic
                                     ? reprojection_jacobian(problem, pose)
                                     : numeric_jacobian(problem, pose);
            jtj = jac.transpose() * jac;
            jtr = jac.transpose() * residuals;
            need_jacobian = false;
        }

        // Marquardt scaling of the damping term by diag(J^T J).
        Eigen::Matrix<double, 6, 6> damped = jtj;
        for (int j = 0; j < 6; ++j) damped(j, j) += lambda * std::max(jtj(j, j), 1e-12);
        const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(damped);
        const PoseParams step = -ldlt.solve(jtr);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            lambda *= config.damping_up;
            if (lambda > kMaxDamping) return finish(SolveStatus::singular, iter);
            continue;
        }

        const bool tiny_step = step.norm() <= config.step_tolerance * (x.norm() + config.step_tolerance);
        PoseParams candidate = x + step;
        const Pose candidate_pose = params_to_pose(candidate);
        const double candidate_cost = squared_norm_or_inf(problem, candidate_pose);

        if (candidate_cost < cost) {
            x = pose_to_params(candidate_pose);
            pose = candidate_pose;
            residuals = reprojection_residuals(problem, pose);
            cost = residuals.squaredNorm();
            need_jacobian = true;
            lambda = std::max(lambda * config.damping_down, 1e-15);
            if (tiny_step || small_residual()) {
                return finish(SolveStatus::converged, iter);
            }
        } else {
            if (tiny_step) return finish(SolveStatus::converged, iter);
            lambda *= config.damping_up;
            if (lambda > kMaxDamping) return finish(SolveStatus::singular, iter);
        }
    }
    return finish(SolveStatus::max_iterations, config.max_iterations);
}

}  // namespace hpe

#include "rabi/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rabi/errors.hpp"

namespace rabi {
namespace {

constexpr int kMaxSubsteps = 1 << 14;
constexpr double kToleranceFloor = 1e-15;

struct Field {
    double x, z;
};

Field field_at(const ModelParams& p, double t) {
    return {-0.5 * p.delta, -0.5 * (p.epsilon + p.amplitude * std::cos(p.omega * t))};
}

// Fourth-order Magnus step built from two Gauss-Legendre nodes. The
// commutator term lands on sigma_y because H only has x and z parts.
Mat2 magnus_step(const ModelParams& p, double t, double h) {
    static const double c = std::sqrt(3.0) / 6.0;
    const Field f1 = field_at(p, t + (0.5 - c) * h);
    const Field f2 = field_at(p, t + (0.5 + c) * h);
    const Vec3 a{0.5 * (f1.x + f2.x), -c * h * (f1.z * f2.x - f1.x * f2.z), 0.5 * (f1.z + f2.z)};
    return su2_exp(a, h);
}

Mat2 run_substeps(const ModelParams& p, double t0, double t1, int n) {
    const double h = (t1 - t0) / n;
    Mat2 u = Mat2::Identity();
    for (int k = 0; k < n; ++k) u = magnus_step(p, t0 + k * h, h) * u;
    return u;
}

// Newton iteration for the polar factor; two passes are plenty when the input
// is already unitary to ~1e-15.
Mat2 polar_project(const Mat2& m) {
    Mat2 u = m;
    for (int i = 0; i < 2; ++i) u = 0.5 * (u + u.adjoint().inverse());
    return u;
}

}  // namespace

Mat2 su2_exp(const Vec3& a, double h) {
    const double n = a.norm();
    const double phi = n * h;
    const double c = std::cos(phi);
    // sin(phi)/n, continuous at n -> 0
    const double s = n > 1e-300 ? std::sin(phi) / n : h;
    Mat2 u;
    u << cplx(c, -s * a.z()), cplx(-s * a.y(), -s * a.x()),
         cplx(s * a.y(), -s * a.x()), cplx(c, s * a.z());
    return u;
}

Mat2 propagate_interval(const ModelParams& p, double t0, double t1, double local_tol,
                        int* substeps_used) {
    int n = substeps_used && *substeps_used > 0 ? *substeps_used : 1;
    Mat2 coarse = run_substeps(p, t0, t1, n);
    while (true) {
        Mat2 fine = run_substeps(p, t0, t1, 2 * n);
        const double err = (fine - coarse).cwiseAbs().maxCoeff() / 15.0;
        if (err <= local_tol) {
            if (substeps_used) *substeps_used = n;
            return fine;
        }
        n *= 2;
        if (n > kMaxSubsteps)
            throw StepFailure("step controller could not reach local tolerance " +
                              std::to_string(local_tol));
        coarse = fine;
    }
}

PropagationResult propagate(const ModelParams& p, const NumericPolicy& policy) {
    p.validate();
    policy.validate();
    const int m = policy.quad_points;
    const double period = p.period();
    const double dt = period / m;
    const double local_tol = std::max(policy.step_tol * dt / period, kToleranceFloor);

    PropagationResult r;
    r.grid.resize(m + 1);
    r.unitaries.resize(m + 1);
    r.grid[0] = 0.0;
    r.unitaries[0] = Mat2::Identity();

    int substeps = 1;
    for (int k = 0; k < m; ++k) {
        const double t0 = k * dt;
        const double t1 = (k + 1 == m) ? period : (k + 1) * dt;
        int used = substeps;
        const Mat2 step = propagate_interval(p, t0, t1, local_tol, &used);
        // Let the controller relax again after a hard interval.
        substeps = std::max(1, used / 2);
        r.max_substeps = std::max(r.max_substeps, 2 * used);

        const Mat2 raw = step * r.unitaries[k];
        r.max_unitarity_defect = std::max(r.max_unitarity_defect, unitarity_defect(raw));
        r.grid[k + 1] = t1;
        r.unitaries[k + 1] = polar_project(raw);
    }
    if (r.max_unitarity_defect > policy.unitarity_tol)
        throw UnitarityLoss("unitarity defect " + std::to_string(r.max_unitarity_defect) +
                            " exceeds tolerance");
    r.su2_defect = verify_su2_structure(r);
    return r;
}

double unitarity_defect(const Mat2& u) {
    return (u.adjoint() * u - Mat2::Identity()).cwiseAbs().maxCoeff();
}

double su2_defect(const Mat2& u) {
    return std::abs(u(0, 0) - std::conj(u(1, 1))) + std::abs(u(0, 1) + std::conj(u(1, 0))) +
           std::abs(u.determinant() - 1.0);
}

double verify_su2_structure(const PropagationResult& r) {
    double d = 0.0;
    for (const auto& u : r.unitaries) d = std::max(d, su2_defect(u));
    return d;
}

Mat2 unitary_at(const PropagationResult& r, std::size_t index, int periods) {
    Mat2 u = r.unitaries.at(index);
    const Mat2& ut = r.final_unitary();
    for (int n = 0; n < periods; ++n) u = u * ut;
    return u;
}

}  // namespace rabi

#pragma once

#include <vector>

#include "rabi/model.hpp"

namespace rabi {

// U(t_k) on a uniform grid of quad_points + 1 samples spanning one period.
struct PropagationResult {
    std::vector<double> grid;
    std::vector<Mat2> unitaries;
    double max_unitarity_defect = 0.0;
    double su2_defect = 0.0;
    int max_substeps = 0;

    const Mat2& final_unitary() const { return unitaries.back(); }
    double spacing() const { return grid[1] - grid[0]; }
    std::size_t size() const { return grid.size(); }
};

// Integrates i dU/dt = H(t) U over [t0, t1] and returns U(t1) U(t0)^-1.
// Throws StepFailure.
Mat2 propagate_interval(const ModelParams& p, double t0, double t1, double local_tol,
                        int* substeps_used = nullptr);

// Throws StepFailure, UnitarityLoss.
PropagationResult propagate(const ModelParams& p, const NumericPolicy& policy = {});

// |u1 - u4*| + |u2 + u3*| + |det U - 1|
double su2_defect(const Mat2& u);
double unitarity_defect(const Mat2& u);
double verify_su2_structure(const PropagationResult& r);

// exp(-i h (a . sigma)) for real a.
Mat2 su2_exp(const Vec3& a, double h);

// U(t + nT) = U(t) U(T)^n
Mat2 unitary_at(const PropagationResult& r, std::size_t index, int periods);

}  // namespace rabi

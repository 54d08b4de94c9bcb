// Quantize a small weight matrix with GPTQ and nearest plane, then show what
// LLL reduction does to a badly skewed basis.

#include <iostream>

#include "latq/latq.hpp"

int main() {
    using namespace latq;

    const Matrix x{{0.9, 0.2, -0.4}, {0.1, 1.1, 0.3}, {-0.5, 0.4, 0.8}, {0.3, -0.2, 0.6}};
    const Matrix w{{1.3, -0.6, 2.2}, {-0.4, 0.9, 0.1}};

    QuantConfig cfg;
    const PreparedLattice lat(x, cfg);
    const auto gptq = quantize_matrix(w, lat, cfg);
    cfg.algorithm = Algorithm::babai;
    const auto babai = quantize_matrix(w, lat, cfg);

    std::cout << "gptq  V:";
    for (auto z : gptq.v.entries()) std::cout << " " << z;
    std::cout << "\nbabai V:";
    for (auto z : babai.v.entries()) std::cout << " " << z;
    std::cout << "\nrow errors:";
    for (double e : gptq.row_errors) std::cout << " " << e;
    const auto bound = absolute_error_bound(lat.factors());
    std::cout << "\nper-row bound: " << bound.full_step_bound << "\n";

    const LatticeBasis skewed(Matrix{{3, 5}, {1, 2}});
    const Vector t{0.4, 0.4};
    const auto plain = babai_from_target(skewed, t);
    const auto red = lll_reduce(skewed);
    const IntVector v = map_solution(red.u, babai_from_target(LatticeBasis(red.basis_red), t).v);
    std::cout << "skewed basis: babai error " << plain.error_l2 << ", after LLL "
              << norm2(sub(t, skewed.matrix() * v)) << ", optimum " << exact_cvp(skewed, t).error_l2 << "\n";

    return gptq.v == babai.v ? 0 : 1;
}

#pragma once

#include <cstdint>
#include <vector>

#include "patchns/core.hpp"

namespace patchns {

/// Lagrangian markers carrying the transported variable f(rho), a side
/// label, and the flow-map Jacobian. Structure-of-arrays; per-particle
/// updates are independent and run in parallel.
struct ParticleCloud {
    std::vector<double> label_x, label_y;  // seeding lattice position y
    std::vector<double> pos_x, pos_y;      // current position x(t)
    std::vector<double> fval;              // carried f(rho)
    std::vector<double> rho;               // cached f^{-1}(fval)
    std::vector<double> jac;               // J(t) > 0
    std::vector<double> rho0;              // initial density at y
    std::vector<std::int8_t> side;         // +1 inside D, -1 outside
    double cell_volume = 0.0;              // lattice cell area
    double L = 0.0;

    int count() const { return int(pos_x.size()); }

    void resize(int m) {
        label_x.resize(m);
        label_y.resize(m);
        pos_x.resize(m);
        pos_y.resize(m);
        fval.resize(m);
        rho.resize(m);
        jac.resize(m);
        rho0.resize(m);
        side.resize(m);
    }

    /// Total mass carried by the particles (exactly conserved: neither
    /// rho0 nor the lattice weights change during a run).
    double total_mass() const {
        double s = 0.0;
        for (double r : rho0) s += r;
        return s * cell_volume;
    }
};

/// Cell binning of particle indices over the velocity grid, rebuilt
/// whenever the grid density is reconstructed.
class ParticleBins {
  public:
    void build(const ParticleCloud& cloud, int n) {
        n_ = n;
        const double inv_h = n / cloud.L;
        const int m = cloud.count();
        cell_of_.resize(m);
        counts_.assign(size_t(n) * n + 1, 0);
        for (int p = 0; p < m; ++p) {
            int ci = int(cloud.pos_x[p] * inv_h) & (n - 1);
            int cj = int(cloud.pos_y[p] * inv_h) & (n - 1);
            int c = cj * n + ci;
            cell_of_[p] = c;
            ++counts_[c + 1];
        }
        for (size_t c = 1; c < counts_.size(); ++c) counts_[c] += counts_[c - 1];
        order_.resize(m);
        std::vector<int> cursor(counts_.begin(), counts_.end() - 1);
        for (int p = 0; p < m; ++p) order_[cursor[cell_of_[p]]++] = p;
    }

    int n() const { return n_; }

    /// Particle indices in cell (ci, cj), wrapped.
    std::pair<const int*, const int*> cell(int ci, int cj) const {
        ci &= (n_ - 1);
        cj &= (n_ - 1);
        int c = cj * n_ + ci;
        return {order_.data() + counts_[c], order_.data() + counts_[c + 1]};
    }

  private:
    int n_ = 0;
    std::vector<int> cell_of_;
    std::vector<int> counts_;
    std::vector<int> order_;
};

}  // namespace patchns

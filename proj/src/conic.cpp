#include "ufd/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ufd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nesterov-Todd scaling state: diagonal for the orthant part, a
// (scale, unit-hyperbolic point) pair per second-order block.
struct Scaling {
    Eigen::VectorXd w_lin;
    struct Soc {
        double eta;
        Eigen::VectorXd wbar;
    };
    std::vector<Soc> soc;
};

struct ConeOps {
    ConeSpec spec;
    int m;

    explicit ConeOps(const ConeSpec& s) : spec(s), m(s.total_rows()) {}

    Eigen::VectorXd unit() const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        e.head(spec.n_nonneg).setOnes();
        int off = spec.n_nonneg;
        for (int d : spec.soc_dims) {
            e(off) = 1.0;
            off += d;
        }
        return e;
    }

    // Largest violation of cone membership; negative means strictly interior.
    double boundary_distance(const Eigen::VectorXd& v) const {
        double a = -kInf;
        if (spec.n_nonneg > 0) a = std::max(a, -v.head(spec.n_nonneg).minCoeff());
        int off = spec.n_nonneg;
        for (int d : spec.soc_dims) {
            a = std::max(a, v.segment(off + 1, d - 1).norm() - v(off));
            off += d;
        }
        return a;
    }

    bool compute_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z, Scaling& W) const {
        if (spec.n_nonneg > 0) {
            if (s.head(spec.n_nonneg).minCoeff() <= 0 || z.head(spec.n_nonneg).minCoeff() <= 0) return false;
            W.w_lin = (s.head(spec.n_nonneg).array() / z.head(spec.n_nonneg).array()).sqrt();
        } else {
            W.w_lin.resize(0);
        }
        W.soc.resize(spec.soc_dims.size());
        int off = spec.n_nonneg;
        for (std::size_t k = 0; k < spec.soc_dims.size(); ++k) {
            const int d = spec.soc_dims[k];
            const auto sb = s.segment(off, d);
            const auto zb = z.segment(off, d);
            const double snorm2 = sb(0) * sb(0) - sb.tail(d - 1).squaredNorm();
            const double znorm2 = zb(0) * zb(0) - zb.tail(d - 1).squaredNorm();
            if (snorm2 <= 0 || znorm2 <= 0) return false;
            Eigen::VectorXd sbar = sb / std::sqrt(snorm2);
            Eigen::VectorXd zbar = zb / std::sqrt(znorm2);
            const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
            Eigen::VectorXd wbar(d);
            wbar(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
            wbar.tail(d - 1) = (sbar.tail(d - 1) - zbar.tail(d - 1)) / (2.0 * gamma);
            W.soc[k].eta = std::pow(snorm2 / znorm2, 0.25);
            W.soc[k].wbar = wbar;
            off += d;
        }
        return true;
    }

    Eigen::VectorXd apply_w(const Scaling& W, const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(m);
        out.head(spec.n_nonneg) = W.w_lin.cwiseProduct(v.head(spec.n_nonneg));
        int off = spec.n_nonneg;
        for (std::size_t k = 0; k < spec.soc_dims.size(); ++k) {
            const int d = spec.soc_dims[k];
            const auto& wb = W.soc[k].wbar;
            const double eta = W.soc[k].eta;
            const auto vb = v.segment(off, d);
            const double dot = wb.tail(d - 1).dot(vb.tail(d - 1));
            out(off) = eta * (wb(0) * vb(0) + dot);
            out.segment(off + 1, d - 1) =
                eta * (vb(0) * wb.tail(d - 1) + vb.tail(d - 1) + (dot / (1.0 + wb(0))) * wb.tail(d - 1));
            off += d;
        }
        return out;
    }

    Eigen::VectorXd apply_winv(const Scaling& W, const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(m);
        out.head(spec.n_nonneg) = v.head(spec.n_nonneg).cwiseQuotient(W.w_lin);
        int off = spec.n_nonneg;
        for (std::size_t k = 0; k < spec.soc_dims.size(); ++k) {
            const int d = spec.soc_dims[k];
            const auto& wb = W.soc[k].wbar;
            const double eta = W.soc[k].eta;
            const auto vb = v.segment(off, d);
            const double dot = wb.tail(d - 1).dot(vb.tail(d - 1));
            out(off) = (wb(0) * vb(0) - dot) / eta;
            out.segment(off + 1, d - 1) =
                (-vb(0) * wb.tail(d - 1) + vb.tail(d - 1) + (dot / (1.0 + wb(0))) * wb.tail(d - 1)) / eta;
            off += d;
        }
        return out;
    }

    Eigen::VectorXd jprod(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(m);
        out.head(spec.n_nonneg) = u.head(spec.n_nonneg).cwiseProduct(v.head(spec.n_nonneg));
        int off = spec.n_nonneg;
        for (int d : spec.soc_dims) {
            const auto ub = u.segment(off, d);
            const auto vb = v.segment(off, d);
            out(off) = ub.dot(vb);
            out.segment(off + 1, d - 1) = ub(0) * vb.tail(d - 1) + vb(0) * ub.tail(d - 1);
            off += d;
        }
        return out;
    }

    // Solves lam o x = u for x.
    Eigen::VectorXd jdiv(const Eigen::VectorXd& lam, const Eigen::VectorXd& u) const {
        Eigen::VectorXd out(m);
        out.head(spec.n_nonneg) = u.head(spec.n_nonneg).cwiseQuotient(lam.head(spec.n_nonneg));
        int off = spec.n_nonneg;
        for (int d : spec.soc_dims) {
            const auto lb = lam.segment(off, d);
            const auto ub = u.segment(off, d);
            const double rho = lb(0) * lb(0) - lb.tail(d - 1).squaredNorm();
            const double x0 = (lb(0) * ub(0) - lb.tail(d - 1).dot(ub.tail(d - 1))) / rho;
            out(off) = x0;
            out.segment(off + 1, d - 1) = (ub.tail(d - 1) - x0 * lb.tail(d - 1)) / lb(0);
            off += d;
        }
        return out;
    }

    // Largest alpha with lam + alpha d still in the cone.
    double max_step(const Eigen::VectorXd& lam, const Eigen::VectorXd& d) const {
        double alpha = kInf;
        for (int i = 0; i < spec.n_nonneg; ++i)
            if (d(i) < 0) alpha = std::min(alpha, -lam(i) / d(i));
        int off = spec.n_nonneg;
        for (int dim : spec.soc_dims) {
            const auto lb = lam.segment(off, dim);
            const auto db = d.segment(off, dim);
            const double a = db(0) * db(0) - db.tail(dim - 1).squaredNorm();
            const double bh = lb(0) * db(0) - lb.tail(dim - 1).dot(db.tail(dim - 1));  // half coefficient
            const double c = lb(0) * lb(0) - lb.tail(dim - 1).squaredNorm();
            // roots of a t^2 + 2 bh t + c = 0; the first positive one is the exit
            double best = kInf;
            if (std::abs(a) < 1e-14) {
                if (bh < 0) best = -c / (2.0 * bh);
            } else {
                const double disc = bh * bh - a * c;
                if (disc >= 0) {
                    const double sq = std::sqrt(disc);
                    const double q = -(bh + (bh >= 0 ? sq : -sq));
                    const double r1 = q / a;
                    const double r2 = (q != 0.0) ? c / q : kInf;
                    for (double r : {r1, r2})
                        if (r > 0) best = std::min(best, r);
                }
            }
            alpha = std::min(alpha, best);
            off += dim;
        }
        return alpha;
    }
};

struct KktSystem {
    int n, p, m;
    const Eigen::SparseMatrix<double>&A, &G;
    const ConeOps& K;
    double reg;
    std::vector<Eigen::Triplet<double>> base;  // structure-constant part
    Eigen::SparseMatrix<double> mat;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    Eigen::VectorXd reg_sign;  // +reg on x rows, -reg on y/z rows
    bool analyzed = false;

    KktSystem(const Eigen::SparseMatrix<double>& A_, const Eigen::SparseMatrix<double>& G_, const ConeOps& K_,
              double reg_)
        : n(static_cast<int>(A_.cols())), p(static_cast<int>(A_.rows())), m(static_cast<int>(G_.rows())),
          A(A_), G(G_), K(K_), reg(reg_) {
        const int N = n + p + m;
        mat.resize(N, N);
        reg_sign.resize(N);
        reg_sign.head(n).setConstant(reg);
        reg_sign.tail(p + m).setConstant(-reg);
        for (int i = 0; i < N; ++i) base.emplace_back(i, i, 0.0);  // keep every diagonal in pattern
        for (int c = 0; c < A.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it) {
                base.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                base.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()), it.value());
            }
        for (int c = 0; c < G.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(G, c); it; ++it) {
                base.emplace_back(n + p + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
                base.emplace_back(static_cast<int>(it.col()), n + p + static_cast<int>(it.row()), it.value());
            }
        // Reserve pattern slots for the dense second-order scaling blocks.
        int off = K.spec.n_nonneg;
        for (int d : K.spec.soc_dims) {
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j)
                    if (i != j) base.emplace_back(n + p + off + i, n + p + off + j, 0.0);
            off += d;
        }
    }

    bool factor(const Scaling& W) {
        std::vector<Eigen::Triplet<double>> trip = base;
        for (int i = 0; i < n; ++i) trip.emplace_back(i, i, reg);
        for (int i = 0; i < p; ++i) trip.emplace_back(n + i, n + i, -reg);
        for (int i = 0; i < K.spec.n_nonneg; ++i)
            trip.emplace_back(n + p + i, n + p + i, -(W.w_lin(i) * W.w_lin(i) + reg));
        int off = K.spec.n_nonneg;
        for (std::size_t k = 0; k < K.spec.soc_dims.size(); ++k) {
            const int d = K.spec.soc_dims[k];
            const auto& wb = W.soc[k].wbar;
            const double e2 = W.soc[k].eta * W.soc[k].eta;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    // W^2 = eta^2 (2 wbar wbar' - J)
                    double v = 2.0 * e2 * wb(i) * wb(j);
                    if (i == 0 && j == 0) v -= e2;
                    if (i == j && i > 0) v += e2;
                    trip.emplace_back(n + p + off + i, n + p + off + j, -(v + (i == j ? reg : 0.0)));
                }
            off += d;
        }
        mat.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            ldlt.analyzePattern(mat);
            analyzed = true;
        }
        ldlt.factorize(mat);
        return ldlt.info() == Eigen::Success;
    }

    // Solve against the unregularized KKT matrix with iterative refinement.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd u = ldlt.solve(rhs);
        for (int pass = 0; pass < 3; ++pass) {
            Eigen::VectorXd r = rhs - (mat * u - reg_sign.cwiseProduct(u));
            if (r.cwiseAbs().maxCoeff() < 1e-14 * (1.0 + rhs.cwiseAbs().maxCoeff())) break;
            u += ldlt.solve(r);
        }
        return u;
    }
};

}  // namespace

const char* to_string(ConicStatus s) {
    switch (s) {
        case ConicStatus::optimal: return "optimal";
        case ConicStatus::primal_infeasible: return "primal infeasible";
        case ConicStatus::dual_infeasible: return "dual infeasible";
        case ConicStatus::max_iterations: return "maximum iterations reached";
        case ConicStatus::numerical_failure: return "numerical failure";
    }
    return "unknown";
}

ConicSolution solve_cone_program(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                                 const Eigen::SparseMatrix<double>& G, const Eigen::VectorXd& h,
                                 const Eigen::VectorXd& c, const ConeSpec& cones, const ConicOptions& opts) {
    const int n = static_cast<int>(c.size());
    const int p = static_cast<int>(b.size());
    const int m = static_cast<int>(h.size());
    if (A.rows() != p || A.cols() != n || G.rows() != m || G.cols() != n || cones.total_rows() != m)
        throw SolverError("cone program dimensions are inconsistent");
    if (m == 0) throw SolverError("cone program needs at least one inequality row");

    ConeOps K(cones);
    const double nu = static_cast<double>(cones.degree()) + 1.0;

    ConicSolution sol;
    Eigen::VectorXd x(n), y(p), z(m), s(m);
    double tau = 1.0, kappa = 1.0;

    KktSystem kkt(A, G, K, opts.reg);

    // Initial point: least-squares style solves with identity scaling,
    // shifted into the cone interior.
    {
        Scaling Wid;
        Wid.w_lin = Eigen::VectorXd::Ones(cones.n_nonneg);
        Wid.soc.resize(cones.soc_dims.size());
        for (std::size_t k = 0; k < cones.soc_dims.size(); ++k) {
            Wid.soc[k].eta = 1.0;
            Wid.soc[k].wbar = Eigen::VectorXd::Zero(cones.soc_dims[k]);
            Wid.soc[k].wbar(0) = 1.0;
        }
        if (!kkt.factor(Wid)) {
            sol.status = ConicStatus::numerical_failure;
            return sol;
        }
        Eigen::VectorXd rhs(n + p + m);
        rhs << Eigen::VectorXd::Zero(n), b, h;
        Eigen::VectorXd u = kkt.solve(rhs);
        x = u.head(n);
        Eigen::VectorXd s0 = -u.tail(m);
        const double ap = K.boundary_distance(s0);
        s = (ap < 0) ? s0 : (s0 + (1.0 + ap) * K.unit()).eval();

        rhs << -c, Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(m);
        u = kkt.solve(rhs);
        y = u.segment(n, p);
        Eigen::VectorXd z0 = u.tail(m);
        const double ad = K.boundary_distance(z0);
        z = (ad < 0) ? z0 : (z0 + (1.0 + ad) * K.unit()).eval();
    }

    const double bnorm = p > 0 ? 1.0 + b.cwiseAbs().maxCoeff() : 1.0;
    const double hnorm = 1.0 + h.cwiseAbs().maxCoeff();
    const double cnorm = 1.0 + c.cwiseAbs().maxCoeff();

    Scaling W;
    const auto t_start = std::chrono::steady_clock::now();
    const auto out_of_time = [&] {
        if (opts.time_limit_s <= 0.0) return false;
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t_start;
        return dt.count() > opts.time_limit_s;
    };
    for (int iter = 0; iter <= opts.max_iter; ++iter) {
        const Eigen::VectorXd rx = A.transpose() * y + G.transpose() * z + c * tau;
        const Eigen::VectorXd ry = A * x - b * tau;
        const Eigen::VectorXd rz = G * x + s - h * tau;
        const double cx = c.dot(x), by = p > 0 ? b.dot(y) : 0.0, hz = h.dot(z);
        const double rt = cx + by + hz + kappa;

        const double pres = std::max(p > 0 ? ry.cwiseAbs().maxCoeff() / bnorm : 0.0,
                                     rz.cwiseAbs().maxCoeff() / hnorm) / tau;
        const double dres = rx.cwiseAbs().maxCoeff() / cnorm / tau;
        const double gap_abs = s.dot(z) / (tau * tau);
        const double pcost = cx / tau;
        const double relgap = gap_abs / std::max(1.0, std::abs(pcost));

        if (opts.verbose)
            std::printf("it %2d  pres %9.2e  dres %9.2e  gap %9.2e  tau %9.2e  kap %9.2e\n", iter, pres, dres,
                        gap_abs, tau, kappa);

        if (pres < opts.tol_feas && dres < opts.tol_feas && (gap_abs < opts.tol || relgap < opts.tol)) {
            sol.status = ConicStatus::optimal;
            sol.x = x / tau;
            sol.y = y / tau;
            sol.z = z / tau;
            sol.s = s / tau;
            sol.obj = pcost;
            sol.gap = gap_abs;
            sol.pres = pres;
            sol.dres = dres;
            sol.iterations = iter;
            return sol;
        }

        // Certificates of infeasibility become meaningful once tau collapses
        // relative to kappa.
        if (tau < 1e-6 * std::min(1.0, kappa)) {
            if (by + hz < -1e-12) {
                const double sc = -1.0 / (by + hz);
                if (((A.transpose() * y + G.transpose() * z) * sc).cwiseAbs().maxCoeff() < opts.tol_feas * cnorm) {
                    sol.status = ConicStatus::primal_infeasible;
                    sol.y = y * sc;
                    sol.z = z * sc;
                    sol.iterations = iter;
                    return sol;
                }
            }
            if (cx < -1e-12) {
                const double sc = -1.0 / cx;
                const double ares = p > 0 ? (A * x * sc).cwiseAbs().maxCoeff() : 0.0;
                if (ares < opts.tol_feas * bnorm && ((G * x + s) * sc).cwiseAbs().maxCoeff() < opts.tol_feas * hnorm) {
                    sol.status = ConicStatus::dual_infeasible;
                    sol.x = x * sc;
                    sol.s = s * sc;
                    sol.iterations = iter;
                    return sol;
                }
            }
        }
        if (iter == opts.max_iter || out_of_time()) break;

        if (!K.compute_scaling(s, z, W) || !kkt.factor(W)) {
            sol.status = ConicStatus::numerical_failure;
            sol.iterations = iter;
            return sol;
        }
        const Eigen::VectorXd lambda = K.apply_w(W, z);
        const double mu = (s.dot(z) + tau * kappa) / nu;

        Eigen::VectorXd rhs1(n + p + m);
        rhs1 << -c, b, h;
        const Eigen::VectorXd u1 = kkt.solve(rhs1);
        const auto cbh = [&](const Eigen::VectorXd& u) {
            return c.dot(u.head(n)) + (p > 0 ? b.dot(u.segment(n, p)) : 0.0) + h.dot(u.tail(m));
        };
        const double denom_u1 = cbh(u1) - kappa / tau;

        auto direction = [&](double sigma, const Eigen::VectorXd& ds, double dkap, Eigen::VectorXd& dx,
                             Eigen::VectorXd& dy, Eigen::VectorXd& dz, Eigen::VectorXd& dsl, double& dtau,
                             double& dkappa) {
            Eigen::VectorXd w_lds = K.apply_w(W, K.jdiv(lambda, ds));
            Eigen::VectorXd rhs(n + p + m);
            rhs.head(n) = -(1.0 - sigma) * rx;
            rhs.segment(n, p) = -(1.0 - sigma) * ry;
            rhs.tail(m) = -(1.0 - sigma) * rz - w_lds;
            const Eigen::VectorXd u2 = kkt.solve(rhs);
            const double r4 = -(1.0 - sigma) * rt - dkap / tau;
            dtau = (r4 - cbh(u2)) / denom_u1;
            dx = u2.head(n) + dtau * u1.head(n);
            dy = u2.segment(n, p) + dtau * u1.segment(n, p);
            dz = u2.tail(m) + dtau * u1.tail(m);
            dsl = w_lds - K.apply_w(W, K.apply_w(W, dz));
            dkappa = (dkap - kappa * dtau) / tau;
        };

        // Predictor (affine) direction.
        Eigen::VectorXd ds_aff = -K.jprod(lambda, lambda);
        Eigen::VectorXd dx_a, dy_a, dz_a, dsl_a;
        double dtau_a, dkap_a;
        direction(0.0, ds_aff, -tau * kappa, dx_a, dy_a, dz_a, dsl_a, dtau_a, dkap_a);

        const Eigen::VectorXd dz_scaled_a = K.apply_w(W, dz_a);
        const Eigen::VectorXd ds_scaled_a = K.apply_winv(W, dsl_a);
        double alpha = std::min(K.max_step(lambda, dz_scaled_a), K.max_step(lambda, ds_scaled_a));
        if (dtau_a < 0) alpha = std::min(alpha, -tau / dtau_a);
        if (dkap_a < 0) alpha = std::min(alpha, -kappa / dkap_a);
        alpha = std::min(alpha, 1.0);

        const double mu_aff = ((s + alpha * dsl_a).dot(z + alpha * dz_a) +
                               (tau + alpha * dtau_a) * (kappa + alpha * dkap_a)) / nu;
        double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
        sigma = std::min(1.0, std::max(0.0, sigma));

        // Corrector with Mehrotra cross terms.
        Eigen::VectorXd ds_cmb = -K.jprod(lambda, lambda) - K.jprod(ds_scaled_a, dz_scaled_a);
        ds_cmb += sigma * mu * K.unit();
        const double dkap_cmb = -tau * kappa - dtau_a * dkap_a + sigma * mu;
        Eigen::VectorXd dx, dy, dz, dsl;
        double dtau, dkappa;
        direction(sigma, ds_cmb, dkap_cmb, dx, dy, dz, dsl, dtau, dkappa);

        const Eigen::VectorXd dz_scaled = K.apply_w(W, dz);
        const Eigen::VectorXd ds_scaled = K.apply_winv(W, dsl);
        double step = std::min(K.max_step(lambda, dz_scaled), K.max_step(lambda, ds_scaled));
        if (dtau < 0) step = std::min(step, -tau / dtau);
        if (dkappa < 0) step = std::min(step, -kappa / dkappa);
        step = std::min(0.99 * step, 1.0);

        if (!std::isfinite(step) || step < 1e-12) {
            sol.status = ConicStatus::numerical_failure;
            sol.iterations = iter;
            break;
        }

        x += step * dx;
        y += step * dy;
        z += step * dz;
        s += step * dsl;
        tau += step * dtau;
        kappa += step * dkappa;
    }

    if (sol.status != ConicStatus::numerical_failure) sol.status = ConicStatus::max_iterations;
    sol.x = x / tau;
    sol.y = y / tau;
    sol.z = z / tau;
    sol.s = s / tau;
    sol.obj = c.dot(sol.x);
    sol.gap = s.dot(z) / (tau * tau);
    sol.iterations = opts.max_iter;
    return sol;
}

ConicSolution ConeProgramBuilder::solve(const ConicOptions& opts) const {
    const int n = n_vars_;
    const int p = static_cast<int>(eq_rows_.size());
    int m = static_cast<int>(ineq_rows_.size());
    ConeSpec cones;
    cones.n_nonneg = m;
    for (const auto& blk : soc_blocks_) {
        cones.soc_dims.push_back(static_cast<int>(blk.size()));
        m += static_cast<int>(blk.size());
    }

    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (const auto& t : obj_) c(t.var) += t.coef;

    std::vector<Eigen::Triplet<double>> ta, tg;
    Eigen::VectorXd b(p), h(m);
    for (int r = 0; r < p; ++r) {
        for (const auto& t : eq_rows_[r].terms) ta.emplace_back(r, t.var, t.coef);
        b(r) = -eq_rows_[r].constant;
    }
    int row = 0;
    for (const auto& e : ineq_rows_) {
        for (const auto& t : e.terms) tg.emplace_back(row, t.var, t.coef);
        h(row) = -e.constant;
        ++row;
    }
    for (const auto& blk : soc_blocks_)
        for (const auto& e : blk) {
            for (const auto& t : e.terms) tg.emplace_back(row, t.var, -t.coef);
            h(row) = e.constant;
            ++row;
        }

    Eigen::SparseMatrix<double> A(p, n), G(m, n);
    A.setFromTriplets(ta.begin(), ta.end());
    G.setFromTriplets(tg.begin(), tg.end());

    ConicSolution sol = solve_cone_program(A, b, G, h, c, cones, opts);
    sol.obj += obj_const_;
    return sol;
}

}  // namespace ufd

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

#include "ufd/errors.hpp"

namespace ufd {

// Cone layout for the rows of (G, h): the first n_nonneg rows are
// componentwise inequalities, followed by second-order blocks of the
// listed dimensions, in order.
struct ConeSpec {
    int n_nonneg = 0;
    std::vector<int> soc_dims;

    int total_rows() const {
        int m = n_nonneg;
        for (int d : soc_dims) m += d;
        return m;
    }
    // Barrier degree: one per inequality, one per second-order block.
    int degree() const { return n_nonneg + static_cast<int>(soc_dims.size()); }
};

enum class ConicStatus {
    optimal,
    primal_infeasible,
    dual_infeasible,
    max_iterations,
    numerical_failure,
};

const char* to_string(ConicStatus s);

struct ConicSolution {
    ConicStatus status = ConicStatus::numerical_failure;
    Eigen::VectorXd x, y, z, s;
    double obj = 0.0;       // c'x at the returned point
    double gap = 0.0;       // absolute duality gap
    double pres = 0.0;      // relative primal residual
    double dres = 0.0;      // relative dual residual
    int iterations = 0;
};

struct ConicOptions {
    double tol = 1e-8;
    double tol_feas = 1e-8;
    int max_iter = 120;
    double reg = 1e-8;          // static regularization on the KKT factorization
    double time_limit_s = 0.0;  // wall-clock budget; 0 disables the check
    bool verbose = false;
};

// Primal-dual interior-point method on the homogeneous self-dual embedding
// of   min c'x  s.t.  Ax = b,  Gx + s = h,  s in K
// with Nesterov-Todd scaling and a predictor-corrector step.
ConicSolution solve_cone_program(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                                 const Eigen::SparseMatrix<double>& G, const Eigen::VectorXd& h,
                                 const Eigen::VectorXd& c, const ConeSpec& cones,
                                 const ConicOptions& opts = {});

// --- small affine-expression toolkit used to assemble programs ---

struct LinTerm {
    int var;
    double coef;
};

struct LinExpr {
    std::vector<LinTerm> terms;
    double constant = 0.0;

    LinExpr() = default;
    /*implicit*/ LinExpr(double c) : constant(c) {}
    static LinExpr variable(int v, double coef = 1.0) {
        LinExpr e;
        e.terms.push_back({v, coef});
        return e;
    }

    LinExpr& operator+=(const LinExpr& o) {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    LinExpr& operator-=(const LinExpr& o) {
        for (const auto& t : o.terms) terms.push_back({t.var, -t.coef});
        constant -= o.constant;
        return *this;
    }
    LinExpr& operator*=(double k) {
        for (auto& t : terms) t.coef *= k;
        constant *= k;
        return *this;
    }
    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
    friend LinExpr operator*(double k, LinExpr e) { return e *= k; }
    friend LinExpr operator-(LinExpr e) { return e *= -1.0; }

    double eval(const Eigen::VectorXd& x) const {
        double v = constant;
        for (const auto& t : terms) v += t.coef * x(t.var);
        return v;
    }
};

// Incrementally assembles a cone program in the standard form above.
// Inequality rows go to the nonnegative orthant; second-order blocks are
// appended after all componentwise rows in insertion order.
class ConeProgramBuilder {
public:
    int add_vars(int n) {
        const int first = n_vars_;
        n_vars_ += n;
        return first;
    }
    int num_vars() const { return n_vars_; }

    void add_objective(const LinExpr& e) {
        for (const auto& t : e.terms) obj_.push_back(t);
        obj_const_ += e.constant;
    }
    double objective_constant() const { return obj_const_; }

    // expr == 0
    void add_eq_zero(const LinExpr& e) { eq_rows_.push_back(e); }
    // expr <= 0
    void add_le_zero(const LinExpr& e) { ineq_rows_.push_back(e); }
    // || tail ||_2 <= head, every element affine
    void add_soc(const std::vector<LinExpr>& block) {
        if (block.size() < 2) throw SolverError("second-order block needs head and tail");
        soc_blocks_.push_back(block);
    }

    int num_eq_rows() const { return static_cast<int>(eq_rows_.size()); }
    int num_ineq_rows() const { return static_cast<int>(ineq_rows_.size()); }
    int num_soc_blocks() const { return static_cast<int>(soc_blocks_.size()); }

    ConicSolution solve(const ConicOptions& opts = {}) const;

private:
    int n_vars_ = 0;
    std::vector<LinTerm> obj_;
    double obj_const_ = 0.0;
    std::vector<LinExpr> eq_rows_;
    std::vector<LinExpr> ineq_rows_;
    std::vector<std::vector<LinExpr>> soc_blocks_;
};

}  // namespace ufd

#pragma once

#include <functional>

#include "proxkit/penalty.hpp"

namespace proxkit {

struct ProxOptions {
  double kkt_tol = 1e-10;
  double rel_change_tol = 1e-12;
  int max_iters = 50000;
};

enum class ProxPath { ClosedForm, Iterative };

struct ProxResult {
  Vector point;
  int iterations = 0;
  double kkt_residual = 0.0;
  ProxPath path = ProxPath::ClosedForm;
};

struct NonConvergence : Error {
  NonConvergence(const std::string& msg, Vector last, double residual, int iters)
      : Error(msg), last_iterate(std::move(last)), kkt_residual(residual), iterations(iters) {}
  Vector last_iterate;
  double kkt_residual;
  int iterations;
};

// Euclidean distance from v to the set lambda * subdifferential(f) at beta;
// closed form for all six kinds. v = W(x - prox) makes this the KKT residual.
double kkt_distance(const Penalty& f, double lambda, const Vector& v, const Vector& beta);

// prox_{lambda f}^W(x) = argmin 1/2 ||x - beta||_W^2 + lambda f(beta).
// lambda = 0 returns x. Diagonal W with separable f (and scalar W with any f)
// dispatches to the closed form; otherwise accelerated proximal gradient with
// fixed step 1/sigma_max(W), monotone restart, and the Euclidean prox as the
// backward step, stopping on the KKT residual (relative change as fallback).
ProxResult prox(const Penalty& f, double lambda, const WeightMatrix& w, const Vector& x,
                const ProxOptions& opts = {});

// x - prox(...): by Moreau decomposition this is prox^W of the conjugate of
// lambda*f, i.e. the W-projection onto C_n for sublinear f.
Vector conjugate_prox(const Penalty& f, double lambda, const WeightMatrix& w, const Vector& x,
                      const ProxOptions& opts = {});

// W-projection onto the polyhedron, through the Moreau route: the generating
// sublinear penalty is the adaptive lasso with weights c_j at lambda = 1.
Vector project_polyhedron(const PolyhedronSpec& c, const WeightMatrix& w, const Vector& x,
                          const ProxOptions& opts = {});

// argmin 1/(2n) ||y - X beta||_2^2 + lambda f(beta) by the same accelerated
// scheme on the least-squares loss. lambda = 0 with rank-deficient X is
// rejected (no unique minimizer) with an error directing to ridgeless.
ProxResult plse_solve(const Matrix& x_mat, const Vector& y, const Penalty& f, double lambda,
                      const ProxOptions& opts = {});

// Evaluator for the extended penalty fbar(beta) = f(beta) +
// 1/(2 lambda) beta'(w_bar - q) beta; requires w_bar - q PSD.
std::function<double(const Vector&)> extended_penalty(const Penalty& f, double lambda,
                                                      const WeightMatrix& w_bar,
                                                      const SymMatrix& q);

// true iff Kernel(a) is contained in Kernel(q): every eigenvector of a with
// eigenvalue at or below rank_tol * sigma_max is annihilated by q within 1e-9.
bool kernel_condition(const SymMatrix& a, const SymMatrix& q, double rank_tol = -1.0);

}  // namespace proxkit

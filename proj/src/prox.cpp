#include "tenrec/prox.hpp"

#include <cmath>

namespace tenrec {

namespace {

void check(const Penalty& p, double t) {
  if (!(p.weight >= 0.0)) throw ShapeError("penalty weight must be nonnegative");
  if (!(t > 0.0)) throw ShapeError("prox parameter must be positive");
}

double soft(double u, double tau) {
  if (u > tau) return u - tau;
  if (u < -tau) return u + tau;
  return 0.0;
}

}  // namespace

PenaltyKind parse_penalty_kind(const std::string& name) {
  if (name == "none") return PenaltyKind::none;
  if (name == "l1") return PenaltyKind::l1;
  if (name == "l2_squared" || name == "l2") return PenaltyKind::l2_squared;
  if (name == "nuclear") return PenaltyKind::nuclear;
  throw ShapeError("unknown penalty kind '" + name + "'");
}

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::l1: return "l1";
    case PenaltyKind::l2_squared: return "l2_squared";
    case PenaltyKind::nuclear: return "nuclear";
  }
  return "none";
}

double penalty_value(const Penalty& p, const RealMatrix& v) {
  switch (p.kind) {
    case PenaltyKind::none: return 0.0;
    case PenaltyKind::l1: return p.weight * v.cwiseAbs().sum();
    case PenaltyKind::l2_squared: return p.weight * v.squaredNorm();
    case PenaltyKind::nuclear: {
      if (v.size() == 0) return 0.0;
      Eigen::JacobiSVD<RealMatrix> svd(v);
      return p.weight * svd.singularValues().sum();
    }
  }
  return 0.0;
}

double penalty_value(const Penalty& p, const DenseTensor& v) {
  if (p.kind == PenaltyKind::nuclear) return penalty_value(p, unfold(v, 0));
  double s = 0.0;
  for (double x : v.values()) s += p.kind == PenaltyKind::l1 ? std::abs(x) : x * x;
  return p.kind == PenaltyKind::none ? 0.0 : p.weight * s;
}

double prox_scalar(const Penalty& p, double u, double t) {
  check(p, t);
  switch (p.kind) {
    case PenaltyKind::none: return u;
    case PenaltyKind::l1:
    case PenaltyKind::nuclear: return soft(u, p.weight / t);
    case PenaltyKind::l2_squared: return u * t / (t + 2.0 * p.weight);
  }
  return u;
}

RealMatrix prox(const Penalty& p, const RealMatrix& u, double t) {
  check(p, t);
  switch (p.kind) {
    case PenaltyKind::none: return u;
    case PenaltyKind::l1: return u.unaryExpr([&](double x) { return soft(x, p.weight / t); });
    case PenaltyKind::l2_squared: return u * (t / (t + 2.0 * p.weight));
    case PenaltyKind::nuclear: {
      Eigen::JacobiSVD<RealMatrix> svd(u, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::VectorXd s =
          (svd.singularValues().array() - p.weight / t).cwiseMax(0.0).matrix();
      return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    }
  }
  return u;
}

DenseTensor prox(const Penalty& p, const DenseTensor& u, double t) {
  if (p.kind == PenaltyKind::nuclear) return fold(prox(p, unfold(u, 0), t), 0, u.dims());
  check(p, t);
  DenseTensor out = u;
  for (auto& x : out.values()) x = prox_scalar(p, x, t);
  return out;
}

}  // namespace tenrec

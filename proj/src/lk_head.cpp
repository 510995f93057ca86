#include "pcreg/lk_head.hpp"

#include <stdexcept>

#include <Eigen/Dense>

namespace pcreg {

LkState lk_precompute(const PointCloud& templ, const FeatureFunction& phi, double fd_step) {
  if (!(fd_step > 0.0)) throw std::invalid_argument("lk_precompute: fd_step must be positive");
  LkState s;
  s.fd_step = fd_step;
  s.template_feature = phi(templ);
  const auto width = s.template_feature.size();
  s.jacobian.resize(width, 6);
  for (int i = 0; i < 6; ++i) {
    Twist xi = Twist::Zero();
    xi(i) = -fd_step;
    const GlobalFeature moved = phi(apply(se3_exp(xi), templ));
    if (moved.size() != width) throw std::runtime_error("lk_precompute: feature width changed between calls");
    s.jacobian.col(i) = (moved - s.template_feature) / fd_step;
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.jacobian, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  const double smin = sv.size() ? sv(sv.size() - 1) : 0.0;
  if (!(smax > 0.0) || smin <= kLkRankTolerance * smax) {
    s.rank_deficient = true;
    s.warning = "feature Jacobian is rank deficient (singular values " + std::to_string(smin) + " / " +
                std::to_string(smax) + "); using damped least squares";
    const Eigen::MatrixXd jtj = s.jacobian.transpose() * s.jacobian + kLkDamping * Eigen::MatrixXd::Identity(6, 6);
    s.pseudo_inverse = jtj.ldlt().solve(s.jacobian.transpose());
  } else {
    s.pseudo_inverse = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  }
  return s;
}

Twist lk_solve(const LkState& state, const GlobalFeature& source_feature) {
  if (source_feature.size() != state.template_feature.size()) {
    throw std::invalid_argument("lk_step: feature width does not match the template");
  }
  const Twist xi = state.pseudo_inverse * (source_feature - state.template_feature);
  if (!xi.allFinite()) throw std::runtime_error("lk_step: non-finite twist update");
  return xi;
}

Transform lk_step(const LkState& state, const GlobalFeature& source_feature) {
  return se3_exp(lk_solve(state, source_feature));
}

}  // namespace pcreg

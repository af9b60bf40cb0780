#include "hicd/distillation.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "hicd/error.hpp"
#include "hicd/ops.hpp"

namespace hicd {

LossWeights LossWeights::parse_csv(std::string_view csv) {
  std::vector<double> v;
  std::string item;
  std::istringstream is{std::string(csv)};
  while (std::getline(is, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("weights: cannot parse '" + item + "'");
    }
  }
  if (v.size() != 6) throw ConfigError("weights: expected 6 values s1,s2,c,g,sfd,cfd");
  LossWeights w{v[0], v[1], v[2], v[3], v[4], v[5]};
  w.validate();
  return w;
}

std::string LossWeights::to_csv() const {
  std::ostringstream os;
  os << s1 << ',' << s2 << ',' << c << ',' << g << ',' << sfd << ',' << cfd;
  return os.str();
}

void LossWeights::validate() const {
  for (double v : {s1, s2, c, g, sfd, cfd}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("weights: every weight must be finite and nonnegative");
  }
}

bool LossWeights::any_distillation() const {
  return (sfd > 0.0 && (s1 > 0.0 || s2 > 0.0 || c > 0.0 || g > 0.0)) || cfd > 0.0;
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"s1", w.s1}, {"s2", w.s2}, {"c", w.c}, {"g", w.g}, {"sfd", w.sfd}, {"cfd", w.cfd}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  LossWeights d;
  w.s1 = j.value("s1", d.s1);
  w.s2 = j.value("s2", d.s2);
  w.c = j.value("c", d.c);
  w.g = j.value("g", d.g);
  w.sfd = j.value("sfd", d.sfd);
  w.cfd = j.value("cfd", d.cfd);
  w.validate();
}

Tensor corr_mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("corr_mse: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const Tensor d = sub(a, b);
  return mean(mul(d, d));
}

namespace {

FeatureMap detached(const FeatureMap& f) { return FeatureMap(f.tensor().detach()); }

void require_same(const char* op, const FeatureMap& a, const FeatureMap& b) {
  if (a.tensor().shape() != b.tensor().shape()) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_to_string(a.tensor().shape()) + " and " +
                         shape_to_string(b.tensor().shape()));
  }
}

}  // namespace

Tensor loss_self(const FeatureMap& student, const FeatureMap& teacher) {
  require_same("loss_self", student, teacher);
  return corr_mse(cor_self(student), cor_self(detached(teacher)));
}

Tensor loss_cross(const FeatureMap& student_f1, const FeatureMap& student_f2, const FeatureMap& teacher_f1,
                  const FeatureMap& teacher_f2) {
  require_same("loss_cross", student_f1, student_f2);
  require_same("loss_cross", student_f1, teacher_f1);
  require_same("loss_cross", teacher_f1, teacher_f2);
  return corr_mse(cor_cross(student_f1, student_f2), cor_cross(detached(teacher_f1), detached(teacher_f2)));
}

Tensor loss_global(const FeatureMap& student_f1, const FeatureMap& student_f2, const FeatureMap& teacher_f1,
                   const FeatureMap& teacher_f2, const Tensor& bank_rows) {
  require_same("loss_global", student_f1, teacher_f1);
  require_same("loss_global", student_f2, teacher_f2);
  const Tensor t1 = corr_mse(cor_global(student_f1, bank_rows), cor_global(detached(teacher_f1), bank_rows));
  const Tensor t2 = corr_mse(cor_global(student_f2, bank_rows), cor_global(detached(teacher_f2), bank_rows));
  return add(t1, t2);
}

Tensor loss_cfd(const FeatureMap& student_fc, const FeatureMap& teacher_fc) {
  require_same("loss_cfd", student_fc, teacher_fc);
  return corr_mse(cor_self(student_fc), cor_self(detached(teacher_fc)));
}

namespace {

// Accumulates weight * term into `acc`, skipping absent terms.
void add_weighted(Tensor& acc, const Tensor& term, double weight) {
  if (!term.defined()) return;
  const Tensor scaled = mul_scalar(term, weight);
  acc = acc.defined() ? add(acc, scaled) : scaled;
}

}  // namespace

Tensor loss_sfd(const SfdTerms& terms, const LossWeights& weights) {
  Tensor acc;
  add_weighted(acc, terms.s1, weights.s1);
  add_weighted(acc, terms.s2, weights.s2);
  add_weighted(acc, terms.c, weights.c);
  add_weighted(acc, terms.g, weights.g);
  return acc.defined() ? acc : Tensor::scalar(0.0);
}

Tensor loss_total(const Tensor& ce, const Tensor& sfd, const Tensor& cfd, const LossWeights& weights) {
  Tensor acc = ce;
  add_weighted(acc, sfd, weights.sfd);
  add_weighted(acc, cfd, weights.cfd);
  return acc;
}

DistillLosses distillation_losses(const DistillFeatures& student, const DistillFeatures& teacher,
                                  const Tensor& bank_rows, const LossWeights& weights) {
  if (student.f1.shape() != teacher.f1.shape() || student.fc.shape() != teacher.fc.shape()) {
    throw DimensionError("distillation: student and teacher features differ in shape");
  }
  const std::size_t batch = student.f1.dim(0);
  const bool want_s1 = weights.sfd > 0.0 && weights.s1 > 0.0;
  const bool want_s2 = weights.sfd > 0.0 && weights.s2 > 0.0;
  const bool want_c = weights.sfd > 0.0 && weights.c > 0.0;
  const bool want_g = weights.sfd > 0.0 && weights.g > 0.0 && bank_rows.defined();
  const bool want_cfd = weights.cfd > 0.0;

  std::vector<Tensor> s1, s2, c, g, cfd;
  for (std::size_t n = 0; n < batch; ++n) {
    const FeatureMap sf1(select(student.f1, n)), sf2(select(student.f2, n));
    const FeatureMap tf1(select(teacher.f1, n)), tf2(select(teacher.f2, n));
    if (want_s1) s1.push_back(loss_self(sf1, tf1));
    if (want_s2) s2.push_back(loss_self(sf2, tf2));
    if (want_c) c.push_back(loss_cross(sf1, sf2, tf1, tf2));
    if (want_g) g.push_back(loss_global(sf1, sf2, tf1, tf2, bank_rows));
    if (want_cfd) cfd.push_back(loss_cfd(FeatureMap(select(student.fc, n)), FeatureMap(select(teacher.fc, n))));
  }
  auto batch_mean = [](const std::vector<Tensor>& parts) {
    return parts.empty() ? Tensor() : mean(concat(parts, 0));
  };
  DistillLosses out;
  out.terms = {batch_mean(s1), batch_mean(s2), batch_mean(c), batch_mean(g)};
  const bool any_sfd = out.terms.s1.defined() || out.terms.s2.defined() || out.terms.c.defined() || out.terms.g.defined();
  if (any_sfd) out.sfd = loss_sfd(out.terms, weights);
  out.cfd = batch_mean(cfd);
  return out;
}

}  // namespace hicd

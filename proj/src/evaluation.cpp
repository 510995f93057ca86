#include "pcreg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace pcreg {

std::vector<double> default_thresholds() {
  std::vector<double> t(361);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 * static_cast<double>(i);
  return t;
}

SuccessCurve success_curve(const std::vector<double>& errors, const std::vector<double>& thresholds) {
  if (errors.empty()) throw std::invalid_argument("success_curve: no records");
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("success_curve: thresholds must be ascending");
  }
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  SuccessCurve c;
  c.thresholds = thresholds;
  c.ratios.reserve(thresholds.size());
  for (double tau : thresholds) {
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), tau) - sorted.begin();
    c.ratios.push_back(static_cast<double>(n) / static_cast<double>(sorted.size()));
  }
  return c;
}

SuccessCurve success_curve(const std::vector<EvalRecord>& records, const std::vector<double>& thresholds) {
  std::vector<double> errors;
  errors.reserve(records.size());
  for (const auto& r : records) errors.push_back(r.rotation_error);
  return success_curve(errors, thresholds);
}

double auc(const SuccessCurve& curve) {
  const auto& t = curve.thresholds;
  if (t.size() < 2 || t.size() != curve.ratios.size() || t.front() != 0.0 || t.back() != 180.0) {
    throw std::invalid_argument("auc: thresholds must span [0, 180]");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    area += 0.5 * (curve.ratios[i] + curve.ratios[i - 1]) * (t[i] - t[i - 1]);
  }
  return area / 180.0;
}

Method icp_method(const IcpConfig& cfg, std::string name) {
  return {std::move(name), [cfg](const PointCloud& s, const PointCloud& t) { return icp(s, t, cfg); }};
}

template <typename T>
Method fc_method(const Model<T>& model, const RegistrationConfig& cfg, std::string name) {
  return {std::move(name), [&model, cfg](const PointCloud& s, const PointCloud& t) {
            FcAligner<T> aligner(model);
            return register_iterative(s, t, aligner, cfg);
          }};
}

template <typename T>
Method lk_method(const Model<T>& model, const RegistrationConfig& cfg, std::string name) {
  return {std::move(name), [&model, cfg](const PointCloud& s, const PointCloud& t) {
            LkAligner aligner(feature_function(model));
            return register_iterative(s, t, aligner, cfg);
          }};
}

template <typename T>
Method make_method(const std::string& name, const Model<T>* model, const RegistrationConfig& reg,
                   const IcpConfig& icp_cfg) {
  if (name == "icp") return icp_method(icp_cfg, name);
  if (name != "pcrnet" && name != "ipcrnet" && name != "lk") {
    throw std::invalid_argument("unknown method '" + name + "' (expected icp, pcrnet, ipcrnet or lk)");
  }
  if (!model) throw std::invalid_argument("method '" + name + "' needs a trained model");
  if (name == "lk") return lk_method(*model, reg, name);
  RegistrationConfig cfg = reg;
  if (name == "pcrnet") cfg.max_iterations = 1;
  return fc_method(*model, cfg, name);
}

template Method make_method<float>(const std::string&, const Model<float>*, const RegistrationConfig&,
                                   const IcpConfig&);
template Method make_method<double>(const std::string&, const Model<double>*, const RegistrationConfig&,
                                    const IcpConfig&);
template Method fc_method<float>(const Model<float>&, const RegistrationConfig&, std::string);
template Method fc_method<double>(const Model<double>&, const RegistrationConfig&, std::string);
template Method lk_method<float>(const Model<float>&, const RegistrationConfig&, std::string);
template Method lk_method<double>(const Model<double>&, const RegistrationConfig&, std::string);

unsigned worker_threads() {
  if (const char* env = std::getenv("PCREG_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

EvalRecord run_one(const Method& m, const BenchmarkPair& p) {
  EvalRecord r;
  r.method = m.name;
  r.pair_id = p.pair_id;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const RegistrationResult res = m.run(p.source, p.templ);
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.rotation_error = rotation_error(res.transform, p.target);
    r.translation_error = translation_error(res.transform, p.target);
    r.iterations = res.iterations_used;
    if (!std::isfinite(r.rotation_error) || !std::isfinite(r.translation_error)) throw std::runtime_error("non-finite");
  } catch (const std::exception&) {
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.rotation_error = kFailureRotationError;
    r.translation_error = kFailureTranslationError;
    r.failed = true;
  }
  return r;
}

}  // namespace

std::vector<EvalRecord> benchmark(const std::vector<Method>& methods, const std::vector<BenchmarkPair>& pairs) {
  std::vector<EvalRecord> out;
  out.reserve(methods.size() * pairs.size());
  const unsigned threads = std::min<unsigned>(worker_threads(), static_cast<unsigned>(std::max<std::size_t>(1, pairs.size())));
  for (const Method& m : methods) {
    std::vector<EvalRecord> recs(pairs.size());
    if (threads <= 1) {
      for (std::size_t i = 0; i < pairs.size(); ++i) recs[i] = run_one(m, pairs[i]);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < pairs.size(); i = next++) recs[i] = run_one(m, pairs[i]);
        });
      }
      for (auto& th : pool) th.join();
    }
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<MethodSummary> summarize(const std::vector<EvalRecord>& records) {
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) order.push_back(r.method);
  }
  std::vector<MethodSummary> rows;
  for (const auto& name : order) {
    std::vector<EvalRecord> mine;
    std::vector<double> rot, trans, time, iters;
    for (const auto& r : records) {
      if (r.method != name) continue;
      mine.push_back(r);
      rot.push_back(r.rotation_error);
      trans.push_back(r.translation_error);
      time.push_back(r.wall_time_s * 1e3);
      iters.push_back(r.iterations);
    }
    MethodSummary s;
    s.method = name;
    s.pairs = mine.size();
    mean_std(rot, s.rot_mean, s.rot_std);
    mean_std(trans, s.trans_mean, s.trans_std);
    mean_std(time, s.time_mean_ms, s.time_std_ms);
    s.median_iterations = median(iters);
    s.auc = auc(success_curve(mine));
    s.failures = static_cast<std::size_t>(std::count_if(mine.begin(), mine.end(), [](const EvalRecord& r) { return r.failed; }));
    rows.push_back(s);
  }
  return rows;
}

void write_records_csv(std::ostream& os, const std::vector<EvalRecord>& records) {
  os << "method,pair_id,rot_err_deg,trans_err,iters,time_ms\n";
  const auto old = os.precision(12);
  for (const auto& r : records) {
    os << r.method << ',' << r.pair_id << ',' << r.rotation_error << ',' << r.translation_error << ','
       << r.iterations << ',' << r.wall_time_s * 1e3 << '\n';
  }
  os.precision(old);
}

void write_summary_csv(std::ostream& os, const std::vector<MethodSummary>& rows) {
  os << "method,rot_err_mean_deg,rot_err_std_deg,trans_err_mean_e-2,trans_err_std_e-2,time_mean_ms,time_std_ms,"
        "auc,median_iters,failures\n";
  const auto old = os.precision(8);
  for (const auto& s : rows) {
    os << s.method << ',' << s.rot_mean << ',' << s.rot_std << ',' << s.trans_mean * 100 << ',' << s.trans_std * 100
       << ',' << s.time_mean_ms << ',' << s.time_std_ms << ',' << s.auc << ',' << s.median_iterations << ','
       << s.failures << '\n';
  }
  os.precision(old);
}

std::string format_summary_table(const std::vector<MethodSummary>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "method" << std::right << std::setw(18) << "rot err (deg)"
     << std::setw(22) << "trans err (1e-2)" << std::setw(22) << "time (ms)" << std::setw(8) << "AUC"
     << std::setw(7) << "iters" << std::setw(6) << "fail" << '\n';
  os << std::fixed;
  for (const auto& s : rows) {
    std::ostringstream rot, trans, time;
    rot << std::fixed << std::setprecision(2) << s.rot_mean << " +- " << s.rot_std;
    trans << std::fixed << std::setprecision(2) << s.trans_mean * 100 << " +- " << s.trans_std * 100;
    time << std::fixed << std::setprecision(2) << s.time_mean_ms << " +- " << s.time_std_ms;
    os << std::left << std::setw(12) << s.method << std::right << std::setw(18) << rot.str() << std::setw(22)
       << trans.str() << std::setw(22) << time.str() << std::setw(8) << std::setprecision(4) << s.auc
       << std::setw(7) << std::setprecision(1) << s.median_iterations << std::setw(6) << s.failures << '\n';
  }
  return os.str();
}

}  // namespace pcreg

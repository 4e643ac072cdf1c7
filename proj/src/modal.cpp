#include "railpad/modal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "railpad/error.hpp"
#include "railpad/stats.hpp"
#include "railpad/text.hpp"

namespace railpad {

StateSpaceModel::StateSpaceModel(const Eigen::Matrix2d& a, const Eigen::RowVector2d& c, double fit_quality)
    : a_(a), c_(c), fit_quality_(fit_quality) {
  if (!a.allFinite() || !c.allFinite()) throw EstimationError("state-space model: non-finite matrices");
  const double tr = a.trace();
  const double det = a.determinant();
  if (tr * tr - 4.0 * det >= 0.0) throw EstimationError("state-space model: real eigenvalues, no oscillatory pair");
  if (spectral_radius() >= kMaxSpectralRadius) throw EstimationError("state-space model: unstable eigenvalues");
}

std::complex<double> StateSpaceModel::lambda1() const {
  const double tr = a_.trace();
  const double det = a_.determinant();
  const double disc = 4.0 * det - tr * tr;
  return {0.5 * tr, 0.5 * std::sqrt(std::max(disc, 0.0))};
}

namespace modal {

StateSpaceModel identify_order2(std::span<const double> y, double ts, std::size_t rows) {
  if (!(ts > 0.0)) throw InvalidArgument("identify_order2: sample interval must be positive");
  if (rows < 4) throw InvalidArgument("identify_order2: need at least 4 Hankel block rows");
  if (y.size() < 4 * rows) throw InvalidArgument("identify_order2: signal shorter than 4 x Hankel rows");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (!(*hi > *lo)) throw DegenerateInput("identify_order2: constant signal");

  // Covariance-driven variant: Hankel matrix of output autocorrelations
  // R(1) .. R(2 rows - 1). Products across a burst onset vanish, so every
  // free decay in the window contributes the same poles.
  const auto r = static_cast<Eigen::Index>(rows);
  std::vector<double> acf(2 * rows, 0.0);
  for (std::size_t k = 0; k < acf.size(); ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < y.size(); ++t) acc += y[t + k] * y[t];
    acf[k] = acc / static_cast<double>(y.size());
  }
  Eigen::MatrixXd hankel(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) hankel(i, j) = acf[static_cast<std::size_t>(i + j + 1)];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(hankel, Eigen::ComputeThinU);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::MatrixXd u = svd.matrixU();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-10 * sv(0)) {
    throw DegenerateInput("identify_order2: rank-deficient Hankel matrix");
  }
  Eigen::MatrixXd obs(r, 2);
  obs.col(0) = u.col(0) * std::sqrt(sv(0));
  obs.col(1) = u.col(1) * std::sqrt(sv(1));

  const Eigen::MatrixXd upper = obs.topRows(r - 1);
  const Eigen::MatrixXd lower = obs.bottomRows(r - 1);
  const Eigen::Matrix2d a = upper.colPivHouseholderQr().solve(lower);
  const Eigen::RowVector2d c = obs.row(0);

  // One-step prediction from the characteristic polynomial of A.
  const double tr = a.trace();
  const double det = a.determinant();
  double err = 0.0, energy = 0.0;
  for (std::size_t k = 2; k < y.size(); ++k) {
    const double pred = tr * y[k - 1] - det * y[k - 2];
    err += (y[k] - pred) * (y[k] - pred);
    energy += y[k] * y[k];
  }
  const double quality = energy > 0.0 ? std::sqrt(err / energy) : 1.0;
  return StateSpaceModel(a, c, quality);
}

double eigen_frequency(std::complex<double> lambda1, double ts) {
  if (!(ts > 0.0)) throw InvalidArgument("eigen_frequency: sample interval must be positive");
  if (lambda1.imag() == 0.0) throw InvalidArgument("eigen_frequency: eigenvalue is real, no oscillatory pair");
  if (lambda1 == 0.0) throw InvalidArgument("eigen_frequency: zero eigenvalue");
  return std::abs(std::log(lambda1)) / (2.0 * std::numbers::pi * ts);
}

double eigen_frequency(const StateSpaceModel& model, double ts) { return eigen_frequency(model.lambda1(), ts); }

std::vector<SegmentResult> analyze_segments(const PassageRecord& record, const EstimationOptions& options) {
  const auto pre = ingest::preprocess(record, options.preprocess);
  const double ts = 1.0 / record.meta.fs_hz;
  std::vector<SegmentResult> results;
  for (const auto& seg : pre.segments) {
    SegmentResult res;
    res.segment_index = seg.segment_index;
    try {
      const auto imfs = emd::decompose(seg, options.emd);
      const auto model = identify_order2(emd::select_imf2(imfs), ts, options.hankel_rows);
      res.freq_hz = eigen_frequency(model, ts);
      res.fit_quality = model.fit_quality();
      if (res.fit_quality > options.max_prediction_error) {
        res.status = SegmentStatus::PoorFit;
      } else if (res.freq_hz < options.band_min_hz || res.freq_hz > options.band_max_hz) {
        res.status = SegmentStatus::OutOfBand;
      } else {
        res.status = SegmentStatus::Accepted;
      }
    } catch (const Error& e) {
      res.status = SegmentStatus::Failed;
      res.message = e.what();
    }
    results.push_back(std::move(res));
  }
  return results;
}

Aggregate aggregate_segments(std::span<const double> per_segment_hz, double band_min_hz, double band_max_hz) {
  Aggregate agg;
  for (double f : per_segment_hz) {
    if (f >= band_min_hz && f <= band_max_hz) agg.survivors.push_back(f);
  }
  if (agg.survivors.empty()) throw EstimationError("no segment estimate inside the physical band");
  agg.value_hz = stats::median(agg.survivors);
  agg.mad_hz = stats::mad(agg.survivors);
  return agg;
}

FrequencyEstimate estimate_passage(const PassageRecord& record, const TemperatureSeries& temps,
                                   const EstimationOptions& options, std::size_t train_index, double t_min,
                                   double t_max) {
  const auto temp = temps.nearest(record.meta.timestamp);
  if (!temp) {
    throw DataError("passage at " + format_iso8601(record.meta.timestamp) + " outside temperature coverage");
  }
  std::vector<double> accepted;
  std::size_t n_segments = 0;
  for (const auto& res : analyze_segments(record, options)) {
    ++n_segments;
    if (res.status == SegmentStatus::Accepted) accepted.push_back(res.freq_hz);
  }
  if (n_segments == 0) throw EstimationError("passage produced no usable bogie segment");
  if (accepted.empty()) throw EstimationError("all bogie segments rejected");
  const auto agg = aggregate_segments(accepted, options.band_min_hz, options.band_max_hz);

  FrequencyEstimate est;
  est.train_index = train_index;
  est.value_hz = agg.value_hz;
  est.per_segment_hz = agg.survivors;
  est.mad_hz = agg.mad_hz;
  est.timestamp = record.meta.timestamp;
  est.temp_c = std::clamp(*temp, t_min, t_max);
  est.temp_clamped = est.temp_c != *temp;
  est.location_id = record.meta.location_id;
  est.n_segments = agg.survivors.size();
  return est;
}

void write_estimate_log(const std::filesystem::path& path, std::span<const FrequencyEstimate> estimates) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write estimate log " + path.string());
  out << "timestamp,location_id,freq_hz,mad_hz,temp_c,n_segments\n";
  for (const auto& e : estimates) {
    out << format_iso8601(e.timestamp) << ',' << e.location_id << ',' << text::format_double(e.value_hz) << ','
        << text::format_double(e.mad_hz) << ',' << text::format_double(e.temp_c) << ',' << e.n_segments << '\n';
  }
}

std::vector<FrequencyEstimate> read_estimate_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open estimate log " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "timestamp,location_id,freq_hz,mad_hz,temp_c,n_segments") {
    throw DataError(path.string() + ": not an estimate log");
  }
  std::vector<FrequencyEstimate> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto f = text::split(text::trim(line), ',');
    if (f.size() != 6) throw DataError(path.string() + ": malformed row " + std::to_string(row + 2));
    FrequencyEstimate e;
    e.train_index = row++;
    e.timestamp = parse_iso8601(f[0]);
    e.location_id = std::string(f[1]);
    e.value_hz = text::parse_double(f[2]);
    e.mad_hz = text::parse_double(f[3]);
    e.temp_c = text::parse_double(f[4]);
    e.n_segments = static_cast<std::size_t>(text::parse_int(f[5]));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace modal
}  // namespace railpad

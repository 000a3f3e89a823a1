#pragma once

// Partition the response into slices and compute the marginal and
// within-slice covariance statistics of the surrogates. Covariances use the
// maximum-likelihood divisor (n, n_m) throughout.

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "surrlad/common.hpp"

namespace surrlad {

struct SliceAssignment {
  std::vector<int> labels;       // slice index 0..M-1 per observation
  std::vector<int> counts;       // n_m
  std::vector<double> proportions;  // f_m = n_m / n
  int num_slices = 0;

  int n() const { return static_cast<int>(labels.size()); }
};

/// Equal-frequency slicing of a continuous response by order statistics
/// (ties go to the lower slice), or one slice per distinct value when the
/// response is categorical. Each slice must hold at least min_slice_size
/// observations.
template <typename Scalar>
SliceAssignment slice_response(const Vec<Scalar>& y, int num_slices, bool y_is_categorical,
                               int min_slice_size = 2) {
  const Index n = y.size();
  SliceAssignment out;
  out.labels.assign(static_cast<size_t>(n), -1);

  if (y_is_categorical) {
    std::map<Scalar, int> level;
    for (Index i = 0; i < n; ++i) level.emplace(y[i], 0);
    int next = 0;
    for (auto& kv : level) kv.second = next++;
    if (num_slices != next) {
      std::ostringstream os;
      os << "slice_response: categorical response has " << next << " distinct values but M = "
         << num_slices;
      throw std::invalid_argument(os.str());
    }
    out.num_slices = next;
    out.counts.assign(static_cast<size_t>(next), 0);
    for (Index i = 0; i < n; ++i) {
      const int m = level.at(y[i]);
      out.labels[static_cast<size_t>(i)] = m;
      ++out.counts[static_cast<size_t>(m)];
    }
  } else {
    if (num_slices < 2) throw std::invalid_argument("slice_response: need M >= 2");
    if (n < static_cast<Index>(num_slices))
      throw std::invalid_argument("slice_response: fewer observations than slices");
    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index(0));
    std::stable_sort(order.begin(), order.end(),
                     [&y](Index a, Index b) { return y[a] < y[b]; });
    out.num_slices = num_slices;
    out.counts.assign(static_cast<size_t>(num_slices), 0);
    Index pos = 0;
    for (int m = 0; m < num_slices; ++m) {
      const Index remaining_slices = num_slices - m;
      Index end = pos + (n - pos + remaining_slices - 1) / remaining_slices;
      while (end < n && y[order[static_cast<size_t>(end)]] == y[order[static_cast<size_t>(end - 1)]])
        ++end;  // a tie never straddles a boundary; the run stays in the lower slice
      if (m == num_slices - 1) end = n;
      for (Index k = pos; k < end; ++k) out.labels[static_cast<size_t>(order[static_cast<size_t>(k)])] = m;
      out.counts[static_cast<size_t>(m)] = static_cast<int>(end - pos);
      pos = end;
    }
  }

  for (int m = 0; m < out.num_slices; ++m) {
    if (out.counts[static_cast<size_t>(m)] < min_slice_size) {
      std::ostringstream os;
      os << "slice_response: slice " << m << " holds " << out.counts[static_cast<size_t>(m)]
         << " observations, fewer than the required " << min_slice_size;
      throw std::invalid_argument(os.str());
    }
  }
  out.proportions.resize(static_cast<size_t>(out.num_slices));
  for (int m = 0; m < out.num_slices; ++m)
    out.proportions[static_cast<size_t>(m)] = double(out.counts[static_cast<size_t>(m)]) / double(n);
  return out;
}

/// Marginal and within-slice first and second moments of the surrogate rows.
template <typename Scalar>
struct SlicedMoments {
  Mat<Scalar> marginal_cov;              // covariance of all rows, divisor n
  std::vector<Mat<Scalar>> slice_covs;   // within-slice covariances, divisor n_m
  std::vector<Vec<Scalar>> slice_means;
  Vec<Scalar> grand_mean;
  Mat<Scalar> pooled_within_cov;         // sum_m f_m * slice_covs[m]
  std::vector<Scalar> proportions;
  std::vector<int> counts;

  Index p() const { return marginal_cov.rows(); }
  int num_slices() const { return static_cast<int>(slice_covs.size()); }
};

template <typename Scalar>
SlicedMoments<Scalar> slice_covariances(const Mat<Scalar>& w, const SliceAssignment& assignment) {
  const Index n = w.rows(), p = w.cols();
  if (n != static_cast<Index>(assignment.labels.size()))
    throw std::invalid_argument("slice_covariances: row count does not match the assignment");
  const int num_slices = assignment.num_slices;

  SlicedMoments<Scalar> out;
  out.grand_mean = w.colwise().mean().transpose();
  const Mat<Scalar> centered = w.rowwise() - out.grand_mean.transpose();
  out.marginal_cov = (centered.transpose() * centered) / Scalar(n);

  out.slice_covs.resize(static_cast<size_t>(num_slices));
  out.slice_means.resize(static_cast<size_t>(num_slices));
  out.counts = assignment.counts;
  out.proportions.assign(assignment.proportions.begin(), assignment.proportions.end());
  out.pooled_within_cov = Mat<Scalar>::Zero(p, p);
  for (int m = 0; m < num_slices; ++m) {
    const Index nm = assignment.counts[static_cast<size_t>(m)];
    Mat<Scalar> rows(nm, p);
    Index r = 0;
    for (Index i = 0; i < n; ++i)
      if (assignment.labels[static_cast<size_t>(i)] == m) rows.row(r++) = w.row(i);
    Vec<Scalar> mean = rows.colwise().mean().transpose();
    rows.rowwise() -= mean.transpose();
    Mat<Scalar> cov = (rows.transpose() * rows) / Scalar(nm);
    out.pooled_within_cov += out.proportions[static_cast<size_t>(m)] * cov;
    out.slice_means[static_cast<size_t>(m)] = std::move(mean);
    out.slice_covs[static_cast<size_t>(m)] = std::move(cov);
  }
  return out;
}

}  // namespace surrlad

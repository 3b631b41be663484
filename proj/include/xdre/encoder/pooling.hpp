#ifndef XDRE_ENCODER_POOLING_HPP_
#define XDRE_ENCODER_POOLING_HPP_

#include <stdexcept>
#include <vector>

#include "xdre/ad/ops.hpp"

namespace xdre::encoder {

struct Span {
  int start = 0;
  int end = 0;
};

/// Componentwise max over the token vectors of a mention span.
template <class S>
ad::Var<S> mention_repr(const ad::Var<S>& token_vectors, Span span) {
  if (span.start >= span.end) throw std::invalid_argument("mention_repr: empty span");
  if (span.start < 0 || span.end > token_vectors.rows()) throw std::out_of_range("mention_repr: span outside token range");
  return ad::max_rows(token_vectors, span.start, span.end);
}

/// Path-level entity vector: componentwise log-sum-exp over its mentions.
template <class S>
ad::Var<S> entity_path_repr(const std::vector<ad::Var<S>>& mentions) {
  if (mentions.empty()) throw std::invalid_argument("entity_path_repr: entity has no mentions");
  return ad::logsumexp_rows(mentions.size() == 1 ? mentions.front() : ad::concat_rows(mentions));
}

// Value-only conveniences.

template <class S>
ad::Matrix<S> mention_repr(const ad::Matrix<S>& token_vectors, Span span) {
  ad::Tape<S> tape(false);
  return mention_repr(tape.constant(token_vectors), span).value();
}

template <class S>
ad::Matrix<S> entity_path_repr(const std::vector<ad::Matrix<S>>& mentions) {
  if (mentions.empty()) throw std::invalid_argument("entity_path_repr: entity has no mentions");
  ad::Matrix<S> stacked(static_cast<Eigen::Index>(mentions.size()), mentions.front().cols());
  for (std::size_t i = 0; i < mentions.size(); ++i) stacked.row(static_cast<Eigen::Index>(i)) = mentions[i].row(0);
  return ad::logsumexp_rows_value(stacked);
}

}  // namespace xdre::encoder

#endif  // XDRE_ENCODER_POOLING_HPP_

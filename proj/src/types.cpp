#include "srmtl/types.hpp"

#include <set>

#include "srmtl/errors.hpp"

namespace srmtl {

std::vector<int> TrialSet::labels() const {
  std::vector<int> out;
  out.reserve(trials.size());
  for (const Trial& t : trials) out.push_back(t.label);
  return out;
}

void validate(const TrialSet& set, bool require_both_classes) {
  if (set.trials.empty()) throw ShapeMismatch("trial set is empty");

  const Index c = set.channels();
  const Index p = set.samples();
  const double fs = set.fs();
  if (c < 2) throw ShapeMismatch("need at least 2 channels, got " + std::to_string(c));
  if (p < 2) throw ShapeMismatch("need at least 2 samples per trial, got " + std::to_string(p));
  if (!(fs > 0)) throw ShapeMismatch("sampling rate must be positive");
  if (!set.channel_names.empty() && static_cast<Index>(set.channel_names.size()) != c)
    throw ShapeMismatch("channel name count does not match channel count");

  std::set<int> seen;
  for (std::size_t i = 0; i < set.trials.size(); ++i) {
    const Trial& t = set.trials[i];
    if (t.data.rows() != c || t.data.cols() != p)
      throw ShapeMismatch("trial " + std::to_string(i) + " has shape " +
                          std::to_string(t.data.rows()) + "x" + std::to_string(t.data.cols()) +
                          ", expected " + std::to_string(c) + "x" + std::to_string(p));
    if (t.fs != fs)
      throw ShapeMismatch("trial " + std::to_string(i) + " sampling rate differs");
    if (!t.data.allFinite())
      throw NonFiniteSample("trial " + std::to_string(i) + " contains NaN or Inf");
    if (t.label != 1 && t.label != 2)
      throw ShapeMismatch("trial " + std::to_string(i) + " has label " +
                          std::to_string(t.label) + ", expected 1 or 2");
    seen.insert(t.label);
  }
  if (require_both_classes && seen.size() < 2)
    throw EmptyClass("training set must contain both classes");
}

TrialSet subset(const TrialSet& set, const std::vector<int>& indices) {
  TrialSet out;
  out.channel_names = set.channel_names;
  out.trials.reserve(indices.size());
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(set.trials.size()))
      throw IndexOutOfRange("trial index " + std::to_string(i) + " out of range");
    out.trials.push_back(set.trials[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace srmtl

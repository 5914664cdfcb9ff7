#include "ultdoa/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ultdoa/error.hpp"
#include "ultdoa/rng.hpp"

namespace ultdoa {

namespace {

std::map<std::int64_t, std::vector<const DatasetRecord*>> group_by_timestamp(const Dataset& ds) {
  std::map<std::int64_t, std::vector<const DatasetRecord*>> groups;
  for (const auto& r : ds.records) groups[r.timestamp_index].push_back(&r);
  return groups;
}

// Drops ToAs whose reference antenna has no ToA, so a missing reference
// removes only that RU's (or, for a common reference, every) observation.
std::vector<ToaMeasurement> with_references(const std::vector<ToaMeasurement>& toas, const DeploymentGeometry& g,
                                            const ReferencePolicy& policy) {
  std::set<AntennaId> present;
  for (const auto& m : toas) present.insert(m.antenna);
  std::vector<ToaMeasurement> out;
  for (const auto& m : toas) {
    const auto ref = policy.kind == ReferencePolicy::Kind::PerRu ? g.reference_of(m.antenna.ru) : policy.common_reference;
    if (present.count(ref)) out.push_back(m);
  }
  return out;
}

}  // namespace

PipelineResult run_tdoa_pipeline(const Dataset& ds, const DeploymentGeometry& g, const PipelineOptions& options) {
  options.pso.validate();
  const double slack = options.tdoa_slack.value_or(ds.header.sample_period);
  PipelineResult result;

  const auto groups = group_by_timestamp(ds);
  std::map<std::int64_t, std::vector<ToaMeasurement>> toas;
  std::vector<ToaMeasurement> all;
  for (const auto& [t, records] : groups) {
    auto& bucket = toas[t];
    for (const auto* r : records) {
      if (!g.contains(r->antenna)) throw Error(Errc::InvalidArgument, "dataset antenna is not in the deployment");
      if (options.toa_source == ToaSource::Truth) {
        if (!r->true_delay) throw Error(Errc::InvalidArgument, "dataset has no direct-delay truth");
        bucket.push_back(toa_from_delay(r->antenna, t, *r->true_delay, static_cast<int>(r->n_fft), r->sample_period));
      } else {
        try {
          bucket.push_back(estimate_toa(r->frame()));
        } catch (const Error& e) {
          if (e.code() != Errc::NoPeak) throw;
          ++result.no_peak;
          continue;
        }
      }
      all.push_back(bucket.back());
    }
  }
  result.toa_total = all.size();

  ToaFilter toa_filter(options.stats_mode);
  if (options.toa_filter && all.size() >= 2) {
    toa_filter.calibrate(all);
    result.toa_stats = toa_filter.pooled();
  }

  SmootherState smoother(options.smooth_window);
  std::vector<double> errors;
  for (const auto& [t, records] : groups) {
    TimestampResult tr;
    tr.timestamp_index = t;
    for (const auto* r : records) {
      if (r->true_position) {
        tr.truth = *r->true_position;
        break;
      }
    }

    std::vector<ToaMeasurement> kept;
    for (const auto& m : toas[t]) {
      if (result.toa_stats && toa_filter(m) == ToaVerdict::Discard) {
        ++tr.toa_rejected;
      } else {
        kept.push_back(m);
      }
    }
    tr.toas = toas[t].size();
    result.toa_rejected += tr.toa_rejected;

    const auto referenced = with_references(kept, g, options.policy);
    tr.orphaned = kept.size() - referenced.size();
    auto set = compute_tdoa(referenced, g, options.policy);
    set.timestamp_index = t;
    result.tdoa_total += set.observations.size();
    if (options.tdoa_filter) {
      auto filtered = filter_tdoa(set, slack);
      tr.tdoa_rejected = filtered.rejected.size();
      set = std::move(filtered.retained);
    }
    result.tdoa_rejected += tr.tdoa_rejected;
    tr.tdoa_observations = set.observations.size();

    if (set.observations.size() < kMinObservations) {
      tr.status = "unsolvable: " + std::to_string(set.observations.size()) + " observations";
      ++result.unsolvable;
      result.timestamps.push_back(std::move(tr));
      continue;
    }
    auto pso = options.pso;
    pso.seed = mix64(options.pso.seed ^ mix64(static_cast<std::uint64_t>(t)));
    tr.estimate = pso_estimate(set, g, pso);
    tr.smoothed = smoother.push(tr.estimate->position);
    if (tr.truth) {
      tr.error = horizontal_distance(*tr.smoothed, *tr.truth);
      errors.push_back(*tr.error);
    }
    result.timestamps.push_back(std::move(tr));
  }
  if (!errors.empty()) result.report = make_report(std::move(errors));
  return result;
}

std::vector<AlignedTimestamp> align_dataset(const Dataset& ds) {
  std::vector<AlignedTimestamp> out;
  for (const auto& [t, records] : group_by_timestamp(ds)) {
    AlignedTimestamp at;
    at.timestamp_index = t;
    std::vector<CirFrame> frames;
    frames.reserve(records.size());
    for (const auto* r : records) {
      frames.push_back(r->frame());
      if (r->true_position && !at.label) at.label = Label2d{r->true_position->x, r->true_position->y};
    }
    at.per_ru = align_timestamp(frames);
    out.push_back(std::move(at));
  }
  return out;
}

FingerprintRun run_fingerprint(const Dataset& train, const Dataset& test, const FingerprintOptions& options) {
  FingerprintRun run;
  const auto train_aligned = align_dataset(train);
  const auto test_aligned = align_dataset(test);
  if (train_aligned.empty()) throw Error(Errc::EmptyTrainingSet, "training dataset has no frames");

  std::vector<CirMagnitudeMatrix> all_train;
  for (const auto& at : train_aligned) all_train.insert(all_train.end(), at.per_ru.begin(), at.per_ru.end());
  run.alpha = compute_norm_factor(all_train, "training dataset " + std::to_string(train.header.deployment_hash));

  for (const auto& at : train_aligned) {
    if (!at.label) throw Error(Errc::InvalidArgument, "training timestamp without a position label");
    auto input = build_input(at.per_ru, run.alpha, options.columns, options.gamma);
    run.train.push_back({std::move(input.matrix), *at.label, at.timestamp_index});
  }
  std::vector<double> errors;
  for (const auto& at : test_aligned) {
    auto input = build_input(at.per_ru, run.alpha, options.columns, options.gamma);
    if (input.all_masked) ++run.all_masked;
    run.test_masks.push_back(input.mask);
    run.test.push_back({std::move(input.matrix), at.label.value_or(Label2d{}), at.timestamp_index});
  }
  const auto model = knn_fit(run.train, std::min(options.k, run.train.size()));
  for (std::size_t i = 0; i < run.test.size(); ++i) {
    run.predictions.push_back(knn_predict(model, run.test[i].input));
    if (test_aligned[i].label) {
      const auto& l = *test_aligned[i].label;
      errors.push_back(std::hypot(run.predictions.back().x - l.x, run.predictions.back().y - l.y));
    }
  }
  if (!errors.empty()) run.report = make_report(std::move(errors));
  return run;
}

}  // namespace ultdoa

// Microbenchmarks for the hot paths: distribution distance, estimation,
// calibration, clustering, regression, and first-token encoding.

#include <benchmark/benchmark.h>

#include <map>
#include <string>
#include <vector>

#include "varcal/ard.hpp"
#include "varcal/bpe.hpp"
#include "varcal/cpd.hpp"
#include "varcal/kmeans.hpp"
#include "varcal/metrics.hpp"
#include "varcal/rng.hpp"

namespace {

varcal::Cpd random_cpd(varcal::Rng& rng, int support) {
  std::map<std::string, double> entries;
  for (int i = 0; i < support; ++i) {
    entries["w" + std::to_string(rng.bounded(4096))] = rng.next_double() + 1e-3;
  }
  double total = 0.0;
  for (const auto& [word, weight] : entries) total += weight;
  for (auto& [word, weight] : entries) weight /= total;
  return varcal::Cpd::from_entries(entries);
}

void bm_tvd(benchmark::State& state) {
  varcal::Rng rng(1);
  const auto p = random_cpd(rng, static_cast<int>(state.range(0)));
  const auto q = random_cpd(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(varcal::tvd(p, q));
  }
}
BENCHMARK(bm_tvd)->Arg(8)->Arg(64)->Arg(512);

void bm_mle(benchmark::State& state) {
  varcal::Rng rng(2);
  varcal::WordCounts counts;
  for (int i = 0; i < state.range(0); ++i) {
    counts.add("w" + std::to_string(rng.bounded(64)));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(varcal::mle(counts));
  }
}
BENCHMARK(bm_mle)->Arg(40)->Arg(400);

void bm_ece(benchmark::State& state) {
  varcal::Rng rng(3);
  std::vector<varcal::CalibrationPoint> points(state.range(0));
  for (auto& point : points) {
    point.confidence = rng.next_double();
    point.correct = rng.next_double() < point.confidence;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(varcal::ece(points, 10));
  }
}
BENCHMARK(bm_ece)->Arg(1000)->Arg(100000);

void bm_kmeans(benchmark::State& state) {
  varcal::Rng rng(4);
  std::vector<std::vector<double>> points(state.range(0),
                                          std::vector<double>(8));
  for (auto& point : points) {
    for (auto& v : point) v = rng.normal();
  }
  varcal::KmeansOptions options;
  options.n_init = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(varcal::kmeans(points, 5, options));
  }
}
BENCHMARK(bm_kmeans)->Arg(64)->Arg(512);

void bm_fit_ard(benchmark::State& state) {
  varcal::Rng rng(5);
  const int n = static_cast<int>(state.range(0));
  std::vector<std::vector<double>> x(n, std::vector<double>(8));
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (auto& v : x[i]) v = rng.normal();
    y[i] = 2.0 * x[i][0] - x[i][1] + 0.1 * rng.normal();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(varcal::fit_ard(x, y));
  }
}
BENCHMARK(bm_fit_ard)->Arg(200)->Arg(1000);

void bm_bpe_first_token(benchmark::State& state) {
  std::vector<varcal::MergeRule> merges = {
      {"Ġ", "t"}, {"h", "e"},  {"Ġt", "he"}, {"i", "n"},
      {"e", "r"}, {"o", "n"},  {"r", "e"},   {"a", "n"},
      {"in", "g"}, {"Ġ", "s"}, {"e", "d"},   {"a", "t"},
  };
  const auto vocab = varcal::BpeVocab::from_merges(std::move(merges));
  const std::vector<std::string> words = {" the", " singing", " created",
                                          " anon", " winter"};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        varcal::bpe_first_token(words[i++ % words.size()], vocab));
  }
}
BENCHMARK(bm_bpe_first_token);

}  // namespace

BENCHMARK_MAIN();

// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "binaural/codebook.hpp"
#include "binaural/kalman.hpp"
#include "binaural/metrics.hpp"
#include "binaural/pipeline.hpp"
#include "binaural/pitch.hpp"
#include "binaural/stp.hpp"
#include "binaural/synth.hpp"
#include "binaural/wav.hpp"
#include "test_util.hpp"

using namespace binaural;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kM = 200;
constexpr double kFs = 8000.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> mixed(const std::vector<double>& ps, double sd, const std::vector<double>& pw, double sv) {
  std::vector<double> out(ps.size());
  for (std::size_t k = 0; k < ps.size(); ++k) out[k] = sd * ps[k] + sv * pw[k];
  return out;
}

double mean_power(const std::vector<double>& x) {
  double e = 0.0;
  for (const double v : x) e += v * v;
  return e / static_cast<double>(x.size());
}

std::vector<double> plus(const std::vector<double>& a, const std::vector<double>& b, double gb = 1.0) {
  std::vector<double> o(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = a[i] + gb * b[i];
  return o;
}

double snr_db(const std::vector<double>& clean, const std::vector<double>& est) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    num += clean[i] * clean[i];
    den += (clean[i] - est[i]) * (clean[i] - est[i]);
  }
  return 10.0 * std::log10(num / den);
}

Verdict mu_monotone() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> level(-4.0, -1.0);
  MuOptions opts;
  opts.record_cost = true;
  opts.tolerance = 0.0;
  opts.max_iterations = 100;
  std::size_t violations = 0, steps = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    // observed: two-ear periodograms of an AR speech + AR noise frame;
    // envelopes: unrelated random stable AR shapes
    const auto a = testutil::random_stable_ar(10, 0.9, rng);
    const auto c = testutil::random_stable_ar(10, 0.6, rng);
    const double sd = std::pow(10.0, level(rng)), sv = std::pow(10.0, level(rng));
    const auto s = testutil::ar_process(a, sd, kM, 10 * t + 1, 500);
    const auto l = plus(s, testutil::ar_process(c, sv, kM, 10 * t + 2, 500));
    const auto r = plus(s, testutil::ar_process(c, sv, kM, 10 * t + 3, 500));
    const Observation obs(Spectrum{testutil::naive_periodogram(l, kM)},
                          Spectrum{testutil::naive_periodogram(r, kM)}, kM);
    const auto ps = testutil::ar_envelope_direct(testutil::random_stable_ar(14, 0.9, rng), kM);
    const auto pw = testutil::ar_envelope_direct(testutil::random_stable_ar(14, 0.9, rng), kM);
    const double init = default_mu_init(obs);
    const auto v = ml_excitation_variances(obs, ps, pw, init, init, opts);
    for (std::size_t i = 1; i < v.cost_trace.size(); ++i) {
      const double up = v.cost_trace[i] - v.cost_trace[i - 1];
      worst = std::max(worst, up);
      violations += up > 1e-10;
      ++steps;
    }
  }
  return {violations == 0, fmt("%zu increases over %zu steps, largest %.2e", violations, steps, worst)};
}

Verdict variance_recovery() {
  std::mt19937_64 rng(2);
  MuOptions opts;
  opts.max_iterations = 200;
  int ok = 0;
  double worst_err = 0.0, worst_ms = 0.0;
  std::size_t worst_iter = 0;
  for (int t = 0; t < 50; ++t) {
    const auto ps = testutil::ar_envelope_direct(testutil::random_stable_ar(14, 0.9, rng), kM);
    const auto pw = testutil::ar_envelope_direct(testutil::random_stable_ar(14, 0.6, rng), kM);
    const auto p = mixed(ps, 1e-3, pw, 1e-3);
    const auto t0 = Clock::now();
    const Observation obs(Spectrum{p}, Spectrum{p}, kM);
    const double init = default_mu_init(obs);
    const auto v = ml_excitation_variances(obs, ps, pw, init, init, opts);
    const double ms = 1e3 * seconds_since(t0);
    const double err = std::max(std::abs(v.speech / 1e-3 - 1.0), std::abs(v.noise / 1e-3 - 1.0));
    worst_err = std::max(worst_err, err);
    worst_ms = std::max(worst_ms, ms);
    worst_iter = std::max(worst_iter, v.iterations);
    ok += err < 0.01 && v.iterations <= 200 && ms < 50.0;
  }
  return {ok == 50, fmt("%d/50 pairs; worst relative error %.2e, %zu iterations, %.2f ms", ok, worst_err,
                        worst_iter, worst_ms)};
}

Verdict likelihood_surface_shape() {
  std::mt19937_64 rng(3);
  const auto ps = testutil::ar_envelope_direct(testutil::random_stable_ar(14, 0.9, rng), kM);
  const auto pw = testutil::ar_envelope_direct(testutil::random_stable_ar(14, 0.6, rng), kM);
  const auto p = mixed(ps, 1e-3, pw, 1e-3);
  const Observation obs(Spectrum{p}, Spectrum{p}, kM);
  std::vector<double> grid;
  for (int i = -20; i <= 20; ++i) grid.push_back(1e-3 * std::pow(10.0, i / 10.0));
  const auto surf = likelihood_surface(obs, ps, pw, grid, grid);
  const auto at = [&](std::size_t i, std::size_t j) { return surf[i * grid.size() + j]; };
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (at(i, j).log_likelihood > at(bi, bj).log_likelihood) {
        bi = i;
        bj = j;
      }
  // true variances sit at index 20; 10x is index 30
  const bool near = std::abs(static_cast<int>(bi) - 20) <= 1 && std::abs(static_cast<int>(bj) - 20) <= 1;
  const double peak = at(bi, bj).log_likelihood;
  const double rs = std::exp(at(30, 20).log_likelihood - peak);
  const double rv = std::exp(at(20, 30).log_likelihood - peak);
  return {near && rs < 1e-3 && rv < 1e-3,
          fmt("peak at (%.3g, %.3g); ratio at 10x speech %.2e, at 10x noise %.2e", at(bi, bj).speech_variance,
              at(bi, bj).noise_variance, rs, rv)};
}

Verdict posterior_concentration() {
  const Codebook speech = formant_codebook(16, 14, 41);
  const Codebook noise = random_codebook(CodebookKind::Noise, 8, 14, 42, 0.9, 0.3);
  const auto sp = make_shapes(speech, kM);
  const auto nz = make_shapes(noise, kM);
  std::mt19937_64 rng(4);
  int above = 0;
  double lowest = 1.0, total = 0.0, speech_total = 0.0;
  for (int f = 0; f < 100; ++f) {
    const std::size_t i = rng() % speech.size(), j = rng() % noise.size();
    const auto s = testutil::ar_process(speech.model(i).coefficients, 1.0, kM, 100 * f + 1, 500);
    auto nl = testutil::ar_process(noise.model(j).coefficients, 1.0, kM, 100 * f + 2, 500);
    auto nr = testutil::ar_process(noise.model(j).coefficients, 1.0, kM, 100 * f + 3, 500);
    const double g = std::sqrt(mean_power(s) / (0.5 * (mean_power(nl) + mean_power(nr))) / 100.0);
    const Observation obs(Spectrum{testutil::naive_periodogram(plus(s, nl, g), kM)},
                          Spectrum{testutil::naive_periodogram(plus(s, nr, g), kM)}, kM);
    const auto r = estimate_stp(obs, sp, nz);
    const double w = r.weights[i * noise.size() + j];
    above += w > 0.9;
    lowest = std::min(lowest, w);
    total += w;
    for (std::size_t jj = 0; jj < noise.size(); ++jj) speech_total += r.weights[i * noise.size() + jj];
  }
  return {above == 100, fmt("%d/100 frames above 0.9; lowest %.4f, mean %.4f; true speech entry alone %.4f",
                            above, lowest, total / 100.0, speech_total / 100.0)};
}

constexpr std::size_t kCtx = 100;

std::vector<double> harmonic(double f0, const std::vector<double>& amp, const std::vector<double>& phase) {
  std::vector<double> x(kM + 2 * kCtx, 0.0);
  const double w = 2.0 * std::numbers::pi * f0 / kFs;
  for (std::size_t p = 0; p < amp.size(); ++p)
    for (std::size_t n = 0; n < x.size(); ++n)
      x[n] += amp[p] * std::cos(w * static_cast<double>(p + 1) * static_cast<double>(n) + phase[p]);
  return x;
}

std::vector<double> noisy(const std::vector<double>& x, double snr_db, std::uint64_t seed) {
  const double sigma = std::sqrt(mean_power(x) / std::pow(10.0, snr_db / 10.0));
  return plus(x, testutil::white_noise(x.size(), sigma, seed));
}

ComplexVector analytic(const std::vector<double>& x) { return analytic_frame(x, kCtx, kM, kCtx); }

Verdict pitch_accuracy() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  int hits = 0;
  for (int t = 0; t < 100; ++t) {
    const auto clean = harmonic(100.0, {1.0, 0.7, 0.5}, {ph(rng), ph(rng), ph(rng)});
    const auto est = estimate_pitch(analytic(noisy(clean, 10.0, 1000 + t)), analytic(noisy(clean, 10.0, 2000 + t)));
    hits += std::abs(est.info.f0_hz(kFs) - 100.0) <= 0.5;
  }
  int gross_two = 0, gross_one = 0;
  for (int t = 0; t < 200; ++t) {
    const double f0 = 100.0 + 0.5 * t;
    const auto clean = harmonic(f0, {1.0, 0.6, 0.4}, {ph(rng), ph(rng), ph(rng)});
    const auto l = analytic(noisy(clean, 3.0, 3000 + t));
    const auto r = analytic(noisy(clean, 3.0, 4000 + t));
    const auto two = estimate_pitch(l, r);
    const auto one = estimate_pitch(l, {});
    gross_two += !two.info.voiced() || std::abs(two.info.f0_hz(kFs) - f0) > 0.2 * f0;
    gross_one += !one.info.voiced() || std::abs(one.info.f0_hz(kFs) - f0) > 0.2 * f0;
  }
  return {hits >= 95 && gross_two <= gross_one,
          fmt("%d/100 within 0.5 Hz at 10 dB; gross errors at 3 dB: two ears %d/200, one ear %d/200", hits,
              gross_two, gross_one)};
}

FrameParameters known(const std::vector<double>& a, double sd, double sv, PitchInfo pitch = {}) {
  FrameParameters p;
  p.stp.speech = ArModel{a, sd};
  p.stp.noise = ArModel{{}, sv};
  p.pitch = pitch;
  return p;
}

Verdict flks_gap() {
  const double rad = 0.95, theta = 0.3;
  const std::vector<double> a = {2.0 * rad * std::cos(theta), -rad * rad};
  const auto s = testutil::ar_process(a, 1.0, 8000, 6);
  const double sv = mean_power(s) / std::pow(10.0, 0.5);
  const auto z = plus(s, testutil::white_noise(s.size(), std::sqrt(sv), 7));
  const std::vector<FrameParameters> p(s.size() / kM, known(a, 1.0, sv));
  SmootherConfig cfg;
  cfg.excitation = ExcitationModel::Unvoiced;
  const auto t0 = Clock::now();
  const auto out = enhance_channel(z, p, cfg);
  const double secs = seconds_since(t0);
  const double in = snr_db(s, z), got = snr_db(s, out);
  const double oracle = snr_db(s, testutil::wiener_oracle(z, a, 1.0, sv));
  return {got >= oracle - 1.5 && got >= in + 4.0 && secs < 2.0,
          fmt("input %.2f dB, smoother %.2f dB, Wiener %.2f dB, %.3f s", in, got, oracle, secs)};
}

Verdict vuv_degenerate() {
  const std::vector<double> a = {1.2, -0.5};
  const auto s = testutil::ar_process(a, 1.0, 4000, 8);
  const auto z = plus(s, testutil::white_noise(s.size(), 0.8, 9));
  std::vector<FrameParameters> p;
  for (std::size_t f = 0; f < s.size() / kM; ++f) {
    const std::size_t period = 40 + 3 * f;
    p.push_back(known(a, 1.0 + 0.1 * static_cast<double>(f % 3), 0.64,
                      PitchInfo{2.0 * std::numbers::pi / static_cast<double>(period), period, 0.0, 3}));
  }
  SmootherConfig cfg;
  cfg.excitation = ExcitationModel::Unvoiced;
  const auto uv = enhance_channel(z, p, cfg);
  cfg.excitation = ExcitationModel::VoicedUnvoiced;
  const auto vuv = enhance_channel(z, p, cfg);
  double acc = 0.0;
  for (std::size_t i = 0; i < uv.size(); ++i) acc += (uv[i] - vuv[i]) * (uv[i] - vuv[i]);
  const double rms = std::sqrt(acc / static_cast<double>(uv.size()));
  return {rms < 1e-8, fmt("RMS difference %.2e", rms)};
}

// Noise codebook trained on 30 s of noise drawn from the scene noise
// generator, separate from the test scenes.
Codebook trained_noise(const Codebook& speech, const Codebook& source) {
  SceneOptions t;
  t.length = 30 * 8000;
  t.seed = 999;
  t.snr_db = -60.0;
  const Scene tr = make_scene(speech, source, t);
  auto frames = extract_frames(tr.noise_l, kM);
  const auto fr = extract_frames(tr.noise_r, kM, Channel::Right);
  frames.insert(frames.end(), fr.begin(), fr.end());
  LloydOptions lo;
  lo.size = 8;
  lo.seed = 1;
  return train_codebook(frames, 14, CodebookKind::Noise, lo).codebook;
}

// Mean segSNR improvement over both ears and seeds.
double improvement(const Codebook& speech, const Codebook& source, const Codebook& noise, double snr,
                   double voiced_fraction, const RunConfig& cfg, int seeds) {
  double total = 0.0;
  const Enhancer enh(speech, noise, cfg);
  for (int seed = 1; seed <= seeds; ++seed) {
    SceneOptions o;
    o.length = 8000;
    o.snr_db = snr;
    o.seed = static_cast<std::uint64_t>(seed);
    o.voiced_fraction = voiced_fraction;
    const Scene s = make_scene(speech, source, o);
    const auto out = enh.process(s.noisy_l, s.noisy_r);
    total += 0.5 * (segmental_snr(s.clean_l, out.left.enhanced) - segmental_snr(s.clean_l, s.noisy_l) +
                    segmental_snr(s.clean_r, out.right.enhanced) - segmental_snr(s.clean_r, s.noisy_r));
  }
  return total / seeds;
}

Verdict end_to_end_trend() {
  const Codebook speech = formant_codebook(16, 14, 101);
  const Codebook source = random_codebook(CodebookKind::Noise, 8, 14, 202, 0.9, 0.3);
  const Codebook noise = trained_noise(speech, source);
  const int seeds = 8;
  std::string detail;
  bool pass = true;
  for (const auto model : {ExcitationModel::Unvoiced, ExcitationModel::VoicedUnvoiced}) {
    double prev_gap = INFINITY;
    detail += model == ExcitationModel::Unvoiced ? "UV" : "; V-UV";
    for (const double snr : {0.0, 3.0, 5.0, 10.0}) {
      RunConfig cfg;
      cfg.excitation = model;
      const double bin = improvement(speech, source, noise, snr, 0.5, cfg, seeds);
      cfg.mode = Mode::Bilateral;
      const double bil = improvement(speech, source, noise, snr, 0.5, cfg, seeds);
      pass = pass && bin >= bil && bin - bil <= prev_gap;
      prev_gap = bin - bil;
      detail += fmt(" %g dB %.2f/%.2f", snr, bin, bil);
    }
  }
  detail += "; voiced-dominant V-UV/UV";
  for (const double snr : {0.0, 5.0}) {
    RunConfig cfg;
    cfg.excitation = ExcitationModel::Unvoiced;
    const double uv = improvement(speech, source, noise, snr, 0.9, cfg, seeds);
    cfg.excitation = ExcitationModel::VoicedUnvoiced;
    const double vuv = improvement(speech, source, noise, snr, 0.9, cfg, seeds);
    pass = pass && vuv >= uv;
    detail += fmt(" %g dB %.2f/%.2f", snr, vuv, uv);
  }
  return {pass, detail};
}

Scene cue_scene(double gain) {
  const Codebook speech = formant_codebook(8, 14, 61);
  const Codebook noise = random_codebook(CodebookKind::Noise, 4, 14, 62, 0.9, 0.3);
  SceneOptions o;
  o.length = 8000;
  o.snr_db = 5.0;
  o.seed = 63;
  Scene s = make_scene(speech, noise, o);
  for (auto* ch : {&s.noisy_l, &s.noisy_r})
    for (auto& v : *ch) v *= gain;
  return s;
}

Verdict cue_preservation() {
  const Codebook speech = formant_codebook(8, 14, 61);
  const Codebook noise = random_codebook(CodebookKind::Noise, 4, 14, 62, 0.9, 0.3);
  const Enhancer enh(speech, noise, {});
  const Scene a = cue_scene(1.0), b = cue_scene(2.0);
  const auto x = enh.process(a.noisy_l, a.noisy_r);
  const auto y = enh.process(b.noisy_l, b.noisy_r);
  const auto rep = interaural_errors(x.left.enhanced, x.right.enhanced, y.left.enhanced, y.right.enhanced);
  return {rep.itd_error < 0.01 && rep.ild_error < 0.1,
          fmt("ITD error %.2e, ILD error %.2e dB", rep.itd_error, rep.ild_error)};
}

Verdict determinism() {
  const Codebook speech = formant_codebook(8, 14, 71);
  const Codebook noise = random_codebook(CodebookKind::Noise, 4, 14, 72, 0.9, 0.3);
  SceneOptions o;
  o.length = 4000;
  o.seed = 73;
  const Scene s = make_scene(speech, noise, o);
  const auto run = [&] {
    const auto out = Enhancer(speech, noise, {}).process(s.noisy_l, s.noisy_r);
    std::vector<double> l = out.left.enhanced, r = out.right.enhanced;
    for (auto* ch : {&l, &r})
      for (auto& v : *ch) v = std::clamp(v, -1.0, 1.0);
    return encode_wav(AudioBuffer(8000, std::move(l), std::move(r)));
  };
  const bool same_output = run() == run();

  const auto path = std::filesystem::temp_directory_path() / "binaural_acceptance.cbk";
  save_codebook(speech, path);
  const Codebook back = load_codebook(path, 14);
  std::filesystem::remove(path);
  bool same_bits = back.kind == speech.kind && back.size() == speech.size();
  for (std::size_t i = 0; same_bits && i < speech.size(); ++i)
    for (std::size_t k = 0; k < speech.order; ++k)
      same_bits = same_bits && std::bit_cast<std::uint64_t>(back.entries[i].frequencies[k]) ==
                                   std::bit_cast<std::uint64_t>(speech.entries[i].frequencies[k]);

  const auto frames = extract_frames(s.clean_l, kM);
  LloydOptions lo;
  lo.size = 4;
  lo.seed = 5;
  const auto t1 = train_codebook(frames, 10, CodebookKind::Speech, lo);
  const auto t2 = train_codebook(frames, 10, CodebookKind::Speech, lo);
  const bool lloyd_same = encode_codebook(t1.codebook) == encode_codebook(t2.codebook) &&
                          t1.distortion == t2.distortion;
  return {same_output && same_bits && lloyd_same,
          fmt("enhanced WAV bytes %s, codebook round trip %s, Lloyd %s", same_output ? "identical" : "differ",
              same_bits ? "bit-exact" : "differs", lloyd_same ? "reproducible" : "differs")};
}

struct Criterion {
  const char* name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"MU cost monotone", mu_monotone},
      {"variance recovery", variance_recovery},
      {"likelihood surface", likelihood_surface_shape},
      {"posterior concentration", posterior_concentration},
      {"pitch accuracy", pitch_accuracy},
      {"smoother optimality gap", flks_gap},
      {"V-UV degeneracy", vuv_degenerate},
      {"end-to-end trend", end_to_end_trend},
      {"cue preservation", cue_preservation},
      {"determinism and formats", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!pick.empty() && !pick.contains(n)) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = all[i].run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%-4s criterion %2d  %-24s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", n, all[i].name,
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

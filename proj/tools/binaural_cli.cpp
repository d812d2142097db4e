// binaural: command-line front end for codebook training, enhancement,
// pitch tracking, evaluation, likelihood surfaces and synthetic scenes.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "binaural/codebook.hpp"
#include "binaural/errors.hpp"
#include "binaural/lpc.hpp"
#include "binaural/metrics.hpp"
#include "binaural/pipeline.hpp"
#include "binaural/pitch.hpp"
#include "binaural/stp.hpp"
#include "binaural/synth.hpp"
#include "binaural/wav.hpp"

namespace {

using namespace binaural;

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AudioBuffer read_input(const std::string& path, int rate) {
  AudioBuffer a = read_wav(path);
  if (a.sample_rate() != rate)
    throw UsageError(path + ": sample rate " + std::to_string(a.sample_rate()) + " Hz, expected " +
                     std::to_string(rate) + " Hz (no resampling)");
  return a;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string kind = "speech";
  std::size_t size = 64;
  std::size_t order = 14;
  std::uint64_t seed = 0;
  std::size_t frame_len = 200;
  std::size_t max_iter = 100;
  int rate = 8000;
  std::vector<std::string> inputs;
  std::string output;
};

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--kind", a.kind, "speech or noise")
      ->check(CLI::IsMember({"speech", "noise"}))
      ->capture_default_str();
  app.add_option("--size", a.size, "number of entries")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--order", a.order, "AR order")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", a.seed, "Lloyd initialisation seed")->capture_default_str();
  app.add_option("--frame-len", a.frame_len, "analysis frame length")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--max-iter", a.max_iter, "Lloyd iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--rate", a.rate, "required sample rate")->capture_default_str();
  app.add_option("inputs", a.inputs, "training WAV files")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", a.output, "codebook file (CBK1)")->required();
}

int run_train(const TrainArgs& a) {
  std::vector<Frame> frames;
  for (const auto& path : a.inputs) {
    const AudioBuffer in = read_input(path, a.rate);
    for (int c = 0; c < in.channel_count(); ++c) {
      auto f = extract_frames(in.channel(c), a.frame_len, c == 0 ? Channel::Left : Channel::Right);
      frames.insert(frames.end(), f.begin(), f.end());
    }
  }
  LloydOptions opts;
  opts.size = a.size;
  opts.seed = a.seed;
  opts.max_iterations = a.max_iter;
  const auto kind = a.kind == "speech" ? CodebookKind::Speech : CodebookKind::Noise;
  const TrainResult r = train_codebook(frames, a.order, kind, opts);
  save_codebook(r.codebook, a.output);
  for (std::size_t i = 0; i < r.distortion.size(); ++i)
    std::cout << "iteration " << i + 1 << " distortion " << r.distortion[i] << '\n';
  std::cout << "wrote " << r.codebook.size() << " entries of order " << r.codebook.order << " to "
            << a.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- shared run options

struct RunArgs {
  std::string mode = "binaural";
  std::string model = "vuv";
  std::string speech_cb;
  std::string noise_cb;
  bool no_adaptive = false;
  int rate = 8000;
  std::size_t frame_len = 200;
  std::size_t delay = 25;
  double f0_min = 80.0;
  double f0_max = 400.0;
  double f0_step = 0.5;
  double voicing_threshold = 0.3;
  std::size_t mu_iter = 50;
};

void add_run_options(CLI::App& app, RunArgs& a, bool with_mode) {
  if (with_mode) {
    app.add_option("--mode", a.mode, "binaural, bilateral or single")
        ->check(CLI::IsMember({"binaural", "bilateral", "single"}))
        ->capture_default_str();
    app.add_option("--model", a.model, "excitation model: uv or vuv")
        ->check(CLI::IsMember({"uv", "vuv"}))
        ->capture_default_str();
  }
  app.add_option("--speech-cb", a.speech_cb, "speech codebook");
  app.add_option("--noise-cb", a.noise_cb, "noise codebook");
  app.add_flag("--no-adaptive", a.no_adaptive, "do not append the dual-channel noise entry");
  app.add_option("--rate", a.rate, "required sample rate")->capture_default_str();
  app.add_option("--frame-len", a.frame_len, "frame length")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--delay", a.delay, "smoother lag d_s")->capture_default_str();
  app.add_option("--f0-min", a.f0_min, "lowest pitch candidate, Hz")->capture_default_str();
  app.add_option("--f0-max", a.f0_max, "highest pitch candidate, Hz")->capture_default_str();
  app.add_option("--f0-step", a.f0_step, "pitch grid step, Hz")->capture_default_str();
  app.add_option("--voicing-threshold", a.voicing_threshold, "unvoiced below this")->capture_default_str();
  app.add_option("--mu-iter", a.mu_iter, "multiplicative-update budget")->check(CLI::PositiveNumber)->capture_default_str();
}

RunConfig make_config(const RunArgs& a) {
  RunConfig c;
  c.sample_rate = a.rate;
  c.frame_len = a.frame_len;
  c.dft_len = a.frame_len;
  c.smoother_delay = a.delay;
  c.mode = a.mode == "binaural" ? Mode::Binaural : Mode::Bilateral;
  c.excitation = a.model == "uv" ? ExcitationModel::Unvoiced : ExcitationModel::VoicedUnvoiced;
  c.pitch.sample_rate = a.rate;
  c.pitch.f_min_hz = a.f0_min;
  c.pitch.f_max_hz = a.f0_max;
  c.pitch.step_hz = a.f0_step;
  c.pitch.voicing_threshold = a.voicing_threshold;
  c.mu.max_iterations = a.mu_iter;
  c.adaptive_noise = !a.no_adaptive;
  return c;
}

std::unique_ptr<Enhancer> make_enhancer(const RunArgs& a) {
  if (a.speech_cb.empty()) throw UsageError("--speech-cb is required");
  const Codebook speech = load_codebook(a.speech_cb);
  std::optional<Codebook> noise;
  if (!a.noise_cb.empty()) noise = load_codebook(a.noise_cb);
  if (!noise && (a.no_adaptive || a.mode != "binaural"))
    throw UsageError("--noise-cb is required unless binaural mode uses the adaptive noise entry");
  return std::make_unique<Enhancer>(speech, std::move(noise), make_config(a));
}

// ---------------------------------------------------------------- enhance

struct EnhanceArgs {
  RunArgs run;
  std::string input;
  std::string output;
  std::string diagnostics;
  std::string pitch_csv;
};

void add_enhance(CLI::App& app, EnhanceArgs& a) {
  add_run_options(app, a.run, true);
  app.add_option("input", a.input, "noisy WAV (stereo, or mono with --mode single)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("-o,--output", a.output, "enhanced WAV")->required();
  app.add_option("--diagnostics", a.diagnostics, "per-frame estimation CSV");
  app.add_option("--pitch-csv", a.pitch_csv, "per-frame pitch CSV");
}

int run_enhance(const EnhanceArgs& a) {
  const AudioBuffer in = read_input(a.input, a.run.rate);
  const bool single = a.run.mode == "single";
  if (single && in.channel_count() != 1)
    throw UsageError("--mode single needs a mono input; " + a.input + " has 2 channels");
  if (!single && in.channel_count() != 2)
    throw UsageError("--mode " + a.run.mode + " needs a stereo input; " + a.input + " is mono");
  const auto enh = make_enhancer(a.run);

  std::vector<FrameDiagnostics> diag;
  std::vector<FrameParameters> params;
  AudioBuffer out;
  if (single) {
    auto r = enh->process_single(in.channel(0));
    diag = std::move(r.diagnostics);
    params = std::move(r.params);
    out = AudioBuffer(a.run.rate, std::move(r.enhanced));
  } else {
    auto r = enh->process(in);
    diag = r.left.diagnostics;
    if (a.run.mode == "bilateral") diag.insert(diag.end(), r.right.diagnostics.begin(), r.right.diagnostics.end());
    params = r.left.params;
    out = AudioBuffer(a.run.rate, std::move(r.left.enhanced), std::move(r.right.enhanced));
  }
  write_wav(out, a.output);
  if (!a.diagnostics.empty()) {
    auto f = open_out(a.diagnostics);
    write_diagnostics_csv(f, diag);
  }
  if (!a.pitch_csv.empty()) {
    auto f = open_out(a.pitch_csv);
    write_pitch_csv(f, params, a.run.rate);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- pitch

struct PitchArgs {
  RunArgs run;
  std::string input;
  std::string output;
};

void add_pitch(CLI::App& app, PitchArgs& a) {
  add_run_options(app, a.run, false);
  app.add_option("input", a.input, "WAV, mono or stereo")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", a.output, "CSV file (default stdout)");
}

int run_pitch(PitchArgs a) {
  const AudioBuffer in = read_input(a.input, a.run.rate);
  std::vector<FrameParameters> params;
  if (!a.run.speech_cb.empty()) {
    // full estimation path: pitch on pre-whitened frames
    a.run.mode = in.channel_count() == 2 ? "binaural" : "single";
    const auto enh = make_enhancer(a.run);
    params = in.channel_count() == 2 ? enh->estimate_binaural(in.channel(0), in.channel(1))
                                     : enh->estimate_single(in.channel(0));
  } else {
    const RunConfig cfg = make_config(a.run);
    cfg.validate();
    const std::size_t m = cfg.frame_len;
    if (in.size() < m) throw UsageError("input shorter than one frame");
    for (std::size_t s = 0; s + m <= in.size(); s += m) {
      const auto l = analytic_frame(in.channel(0), s, m, cfg.pitch_context);
      ComplexVector r;
      if (in.channel_count() == 2) r = analytic_frame(in.channel(1), s, m, cfg.pitch_context);
      FrameParameters p;
      p.pitch = estimate_pitch(l, r, cfg.pitch).info;
      params.push_back(p);
    }
  }
  if (a.output.empty()) {
    write_pitch_csv(std::cout, params, a.run.rate);
  } else {
    auto f = open_out(a.output);
    write_pitch_csv(f, params, a.run.rate);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string clean;
  std::string enhanced;
  std::size_t seg_len = 200;
  int rate = 8000;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("clean", a.clean, "reference WAV")->required()->check(CLI::ExistingFile);
  app.add_option("enhanced", a.enhanced, "processed WAV")->required()->check(CLI::ExistingFile);
  app.add_option("--seg-len", a.seg_len, "segment and frame length")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--rate", a.rate, "required sample rate")->capture_default_str();
}

int run_eval(const EvalArgs& a) {
  const AudioBuffer c = read_input(a.clean, a.rate);
  const AudioBuffer e = read_input(a.enhanced, a.rate);
  if (c.channel_count() != e.channel_count()) throw UsageError("channel counts differ");
  if (c.size() != e.size()) throw UsageError("lengths differ");
  nlohmann::ordered_json j;
  j["segsnr_l"] = segmental_snr(c.channel(0), e.channel(0), a.seg_len);
  if (c.channel_count() == 2) {
    j["segsnr_r"] = segmental_snr(c.channel(1), e.channel(1), a.seg_len);
    const auto rep = interaural_errors(c.channel(0), c.channel(1), e.channel(0), e.channel(1), a.seg_len);
    j["itd"] = rep.itd_error;
    j["ild"] = rep.ild_error;
  } else {
    j["segsnr_r"] = nullptr;
    j["itd"] = nullptr;
    j["ild"] = nullptr;
  }
  std::cout << j.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- surface

struct SurfaceArgs {
  std::string speech_cb;
  std::string noise_cb;
  std::size_t speech_index = 0;
  std::size_t noise_index = 0;
  std::string input;
  std::size_t frame = 0;
  double speech_var = 1e-3;
  double noise_var = 1e-3;
  double grid_min = 1e-5;
  double grid_max = 1e-1;
  std::size_t points = 50;
  std::size_t frame_len = 200;
  std::uint64_t seed = 1;
  int rate = 8000;
  std::string output;
};

void add_surface(CLI::App& app, SurfaceArgs& a) {
  app.add_option("--speech-cb", a.speech_cb, "speech codebook supplying the AR shape");
  app.add_option("--noise-cb", a.noise_cb, "noise codebook supplying the AR shape");
  app.add_option("--speech-index", a.speech_index, "entry of the speech codebook")->capture_default_str();
  app.add_option("--noise-index", a.noise_index, "entry of the noise codebook")->capture_default_str();
  app.add_option("--input", a.input, "take the observation from this WAV instead of the model")
      ->check(CLI::ExistingFile);
  app.add_option("--frame", a.frame, "frame of --input")->capture_default_str();
  app.add_option("--speech-var", a.speech_var, "generating speech variance")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--noise-var", a.noise_var, "generating noise variance")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--grid-min", a.grid_min, "smallest grid variance")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--grid-max", a.grid_max, "largest grid variance")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--points", a.points, "grid points per axis, log-spaced")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--frame-len", a.frame_len, "frame and DFT length")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--seed", a.seed, "seed of the built-in AR pair")->capture_default_str();
  app.add_option("--rate", a.rate, "required sample rate of --input")->capture_default_str();
  app.add_option("-o,--output", a.output, "CSV file (default stdout)");
}

int run_surface(const SurfaceArgs& a) {
  if (a.grid_max < a.grid_min) throw UsageError("--grid-max is below --grid-min");
  const std::size_t k = a.frame_len;
  const ArModel speech = a.speech_cb.empty() ? formant_codebook(1, 14, a.seed).model(0)
                                             : load_codebook(a.speech_cb).model(a.speech_index);
  const ArModel noise = a.noise_cb.empty()
                            ? random_codebook(CodebookKind::Noise, 1, 14, a.seed + 1, 0.9, 0.3).model(0)
                            : load_codebook(a.noise_cb).model(a.noise_index);
  const Spectrum ps = ar_envelope(speech, k);
  const Spectrum pw = ar_envelope(noise, k);

  std::vector<Spectrum> channels;
  if (a.input.empty()) {
    Spectrum p = ps;
    for (std::size_t i = 0; i < k; ++i) p.bins[i] = a.speech_var * ps.bins[i] + a.noise_var * pw.bins[i];
    channels = {p, p};
  } else {
    const AudioBuffer in = read_input(a.input, a.rate);
    if ((a.frame + 1) * k > in.size()) throw UsageError("--frame is past the end of --input");
    for (int c = 0; c < in.channel_count(); ++c)
      channels.push_back(periodogram(in.channel(c).subspan(a.frame * k, k), k));
  }
  const Observation obs(channels, k);

  std::vector<double> grid(a.points);
  for (std::size_t i = 0; i < a.points; ++i) {
    const double t = a.points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(a.points - 1);
    grid[i] = a.grid_min * std::pow(a.grid_max / a.grid_min, t);
  }
  const auto surf = likelihood_surface(obs, ps.bins, pw.bins, grid, grid);

  std::ofstream file;
  std::ostream& out = a.output.empty() ? std::cout : (file = open_out(a.output), file);
  out << "sigma_d2,sigma_v2,log_likelihood\n";
  out.precision(17);
  for (const auto& p : surf) out << p.speech_variance << ',' << p.noise_variance << ',' << p.log_likelihood << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string speech_cb;
  std::string noise_cb;
  std::size_t speech_entries = 16;
  std::size_t noise_entries = 8;
  std::size_t order = 14;
  SceneOptions scene;
  std::string clean_out;
  std::string noisy_out;
  std::string speech_cb_out;
  std::string noise_cb_out;
  std::string truth_out;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--speech-cb", a.speech_cb, "speech codebook (default: generated formant shapes)");
  app.add_option("--noise-cb", a.noise_cb, "noise codebook (default: generated AR shapes)");
  app.add_option("--speech-entries", a.speech_entries, "size of the generated speech codebook")->capture_default_str();
  app.add_option("--noise-entries", a.noise_entries, "size of the generated noise codebook")->capture_default_str();
  app.add_option("--order", a.order, "order of generated codebooks")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--length", a.scene.length, "samples per channel")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--snr", a.scene.snr_db, "input SNR, dB")->capture_default_str();
  app.add_option("--seed", a.scene.seed, "scene seed")->capture_default_str();
  app.add_option("--voiced-fraction", a.scene.voiced_fraction, "share of voiced segments")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--coherence", a.scene.noise_coherence, "share of noise common to both ears")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app.add_option("--clean", a.clean_out, "clean stereo WAV")->required();
  app.add_option("--noisy", a.noisy_out, "noisy stereo WAV")->required();
  app.add_option("--write-speech-cb", a.speech_cb_out, "save the speech codebook used");
  app.add_option("--write-noise-cb", a.noise_cb_out, "save the noise codebook used");
  app.add_option("--truth", a.truth_out, "per-frame true pitch CSV");
}

int run_synth(const SynthArgs& a) {
  const std::uint64_t seed = a.scene.seed;
  const Codebook speech = a.speech_cb.empty() ? formant_codebook(a.speech_entries, a.order, seed + 100)
                                              : load_codebook(a.speech_cb);
  const Codebook noise = a.noise_cb.empty()
                             ? random_codebook(CodebookKind::Noise, a.noise_entries, a.order, seed + 200, 0.9, 0.3)
                             : load_codebook(a.noise_cb);
  Scene s = make_scene(speech, noise, a.scene);

  // one gain for both files keeps the scene's SNR and fits PCM16
  double peak = 0.0;
  for (const auto* v : {&s.clean_l, &s.clean_r, &s.noisy_l, &s.noisy_r})
    for (const double x : *v) peak = std::max(peak, std::abs(x));
  const double g = peak > 0.0 ? 0.9 / peak : 1.0;
  for (auto* v : {&s.clean_l, &s.clean_r, &s.noisy_l, &s.noisy_r})
    for (double& x : *v) x *= g;

  write_wav(AudioBuffer(s.sample_rate, s.clean_l, s.clean_r), a.clean_out);
  write_wav(AudioBuffer(s.sample_rate, s.noisy_l, s.noisy_r), a.noisy_out);
  if (!a.speech_cb_out.empty()) save_codebook(speech, a.speech_cb_out);
  if (!a.noise_cb_out.empty()) save_codebook(noise, a.noise_cb_out);
  if (!a.truth_out.empty()) {
    auto f = open_out(a.truth_out);
    write_pitch_csv(f, s.truth, s.sample_rate);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- main

// Flat `key = value` lines apply to the active subcommand; command-line
// flags given explicitly keep their values.
void apply_config(CLI::App& app, CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << '[' << sub.get_name() << "]\n" << in.rdbuf();
  app.parse_from_stream(ss);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based binaural speech enhancement"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);

  TrainArgs train;
  EnhanceArgs enhance;
  PitchArgs pitch;
  EvalArgs eval;
  SurfaceArgs surface;
  SynthArgs synth;
  std::string config;

  struct Sub {
    CLI::App* app;
    std::function<int()> run;
  };
  std::vector<Sub> subs;
  const auto add = [&](const char* name, const char* help, auto&& setup, std::function<int()> run) {
    CLI::App* s = app.add_subcommand(name, help);
    setup(*s);
    s->add_option("--config", config, "key = value settings; flags take precedence")->check(CLI::ExistingFile);
    s->allow_config_extras(CLI::config_extras_mode::error);
    subs.push_back({s, std::move(run)});
  };
  add("train", "train a codebook with the generalized Lloyd algorithm",
      [&](CLI::App& s) { add_train(s, train); }, [&] { return run_train(train); });
  add("enhance", "enhance a noisy recording", [&](CLI::App& s) { add_enhance(s, enhance); },
      [&] { return run_enhance(enhance); });
  add("pitch", "per-frame pitch track as CSV", [&](CLI::App& s) { add_pitch(s, pitch); },
      [&] { return run_pitch(pitch); });
  add("eval", "segmental SNR and interaural cue errors", [&](CLI::App& s) { add_eval(s, eval); },
      [&] { return run_eval(eval); });
  add("surface", "likelihood over a grid of excitation variances",
      [&](CLI::App& s) { add_surface(s, surface); }, [&] { return run_surface(surface); });
  add("synth", "generate a synthetic two-ear scene", [&](CLI::App& s) { add_synth(s, synth); },
      [&] { return run_synth(synth); });

  try {
    app.parse(argc, argv);
    for (auto& s : subs)
      if (s.app->parsed() && !config.empty()) apply_config(app, *s.app, config);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    for (auto& s : subs)
      if (s.app->parsed()) return s.run();
  } catch (const NumericalError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UndefinedMetric& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    // unreadable or unwritable files
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}

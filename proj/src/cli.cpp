#include "pdcmodes/cli.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

namespace pdcmodes {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Opens a run: creates the output directory and fills the common manifest fields.
RunManifest begin_run(const std::string& subcommand, const GlobalOptions& global,
                      const SourceConfig* config) {
    fs::create_directories(global.out);
    RunManifest m;
    m.subcommand = subcommand;
    m.config_path = global.config_path ? global.config_path->string() : "";
    m.output_dir = global.out.string();
    m.seed = global.seed;
    m.threads = global.threads;
    if (config) m.config_text = format_config(*config);
    m.started = utc_now();
    return m;
}

void finish_run(RunManifest& m, const GlobalOptions& global) {
    m.finished = utc_now();
    std::ofstream out(global.out / "manifest.json");
    out << manifest_json(m);
    if (!out) throw Error("cannot write " + (global.out / "manifest.json").string());
}

std::string num(double v) { return format_number(v); }

void write_decomposition(const fs::path& dir, const ModeAnalysis& a) {
    const auto& dec = a.decomposition;
    const auto& grid = a.grid;
    {
        CsvWriter csv(dir / "modes.csv", {"l", "p", "theta", "re", "im"});
        for (const auto& mode : dec.modes())
            for (std::size_t j = 0; j < grid.n_theta(); ++j) {
                const auto v = mode.profile[static_cast<Eigen::Index>(j)];
                csv.cell(mode.l).cell(mode.p).cell(grid.theta[j]).cell(v.real()).cell(v.imag());
                csv.end_row();
            }
    }
    {
        std::vector<std::size_t> order(dec.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return a.spectrum.weights[x] > a.spectrum.weights[y];
        });
        CsvWriter csv(dir / "weights.csv",
                      {"rank", "l", "p", "lambda", "Lambda", "mode_gain", "takagi_phase"});
        int rank = 0;
        for (std::size_t i : order) {
            const auto& mode = dec.modes()[i];
            csv.cell(rank++).cell(mode.l).cell(mode.p).cell(mode.lambda);
            csv.cell(a.spectrum.weights[i]).cell(a.spectrum.mode_gains[i]);
            csv.cell(std::arg(mode.takagi_phase)).end_row();
        }
    }
    {
        CsvWriter csv(dir / "counts.csv", {"K", "K_oam", "schmidt_number", "G0", "G", "theta_max"});
        csv.cell(a.counts.K).cell(a.counts.K_oam).cell(dec.schmidt_number());
        csv.cell(a.spectrum.G0).cell(a.spectrum.G).cell(grid.theta_max()).end_row();
    }
    const auto mean = mean_intensity(dec, a.spectrum, grid);
    {
        CsvWriter csv(dir / "mean_intensity.csv", {"theta", "intensity"});
        for (std::size_t j = 0; j < grid.n_theta(); ++j)
            csv.cell(grid.theta[j]).cell(mean.radial[j]).end_row();
    }
    write_pgm(dir / "mean_intensity.pgm",
              polar_to_cartesian(mean.field, grid, 2 * static_cast<int>(grid.n_theta())));
}

FrameSource frames_of(StackReader& reader) {
    return [&reader](const FrameVisitor& visit) {
        reader.rewind();
        Frame f;
        while (reader.next(f)) visit(f);
    };
}

}  // namespace

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["subcommand"] = m.subcommand;
    j["config_path"] = m.config_path;
    j["output_dir"] = m.output_dir;
    j["seed"] = m.seed;
    j["threads"] = m.threads;
    nlohmann::ordered_json args = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.arguments) args[k] = v;
    j["arguments"] = args;
    j["config"] = m.config_text;
    j["format_versions"] = {{"manifest", kManifestVersion},
                            {"csv", kCsvVersion},
                            {"stack", kStackVersion}};
    j["started"] = m.started;
    j["finished"] = m.finished;
    return j.dump(2) + "\n";
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config_path = j.at("config_path").get<std::string>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.threads = j.at("threads").get<int>();
    for (const auto& [k, v] : j.at("arguments").items())
        m.arguments.emplace_back(k, v.get<std::string>());
    m.config_text = j.at("config").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    return m;
}

SourceConfig load_run_config(const GlobalOptions& global) {
    SourceConfig config = global.config_path ? load_config(*global.config_path) : SourceConfig{};
    config.validate();
    return config;
}

std::vector<double> scan_range(double from, double to, double step) {
    if (!(step > 0)) throw Error("scan step must be > 0");
    if (!(to >= from)) throw Error("empty scan range");
    const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9)) + 1;
    std::vector<double> values;
    for (long i = 0; i < n; ++i) values.push_back(from + static_cast<double>(i) * step);
    return values;
}

std::vector<std::pair<double, double>> read_pairs_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::pair<double, double>> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double a = 0, b = 0;
        if (!(row >> a >> b)) {
            if (number == 1) continue;
            throw Error(path.string() + ":" + std::to_string(number) + ": expected two numbers");
        }
        out.emplace_back(a, b);
    }
    return out;
}

ModeAnalysis cmd_decompose(const GlobalOptions& global) {
    const auto config = load_run_config(global);
    auto manifest = begin_run("decompose", global, &config);
    auto analysis = analyze(config, global.threads);
    write_decomposition(global.out, analysis);
    finish_run(manifest, global);
    return analysis;
}

fs::path cmd_synthesize(const GlobalOptions& global, const SynthesizeOptions& options) {
    if (options.frames < 1) throw Error("synthesize needs at least one frame");
    const auto config = load_run_config(global);
    auto manifest = begin_run("synthesize", global, &config);
    manifest.arguments = {{"frames", std::to_string(options.frames)},
                          {"mode", std::string(to_string(options.mode))},
                          {"normalize", options.normalize ? "true" : "false"},
                          {"name", options.name},
                          {"preview", std::to_string(options.preview)}};
    const auto analysis = analyze(config, global.threads);
    const FrameRenderer renderer(analysis.decomposition, analysis.spectrum,
                                 render_options(config, options.mode, options.normalize));
    const fs::path path = global.out / options.name;
    StackWriter writer(path, stack_info(analysis, options.frames, global.seed, options.mode,
                                        options.normalize));
    const int pixels = 2 * static_cast<int>(analysis.grid.n_theta());
    synthesize_stream(
        renderer, options.frames, global.seed,
        [&](Frame&& f) {
            if (static_cast<long long>(f.index) < options.preview) {
                char name[32];
                std::snprintf(name, sizeof name, "frame_%06zu.pgm", f.index);
                write_pgm(global.out / name,
                          polar_to_cartesian(frame_matrix(f, analysis.grid), analysis.grid, pixels));
            }
            writer.append(f);
        },
        global.threads);
    writer.close();
    finish_run(manifest, global);
    return path;
}

ReconstructKind parse_reconstruct_kind(std::string_view text) {
    if (text == "radial") return ReconstructKind::radial;
    if (text == "oam") return ReconstructKind::oam;
    if (text == "g2") return ReconstructKind::g2;
    throw Error("unknown reconstruction kind '" + std::string(text) + "' (radial, oam, g2)");
}

StackAnalysis cmd_reconstruct(const GlobalOptions& global, const ReconstructOptions& options) {
    StackReader reader(options.stack);
    const auto& info = reader.info();
    const char* kind = options.kind == ReconstructKind::radial ? "radial"
                       : options.kind == ReconstructKind::oam  ? "oam"
                                                               : "g2";
    auto manifest = begin_run("reconstruct", global, &info.config);
    const auto& o = options.analysis;
    manifest.arguments = {{"stack", options.stack.string()},
                          {"kind", kind},
                          {"sector_half_angle", num(o.sector_half_angle)},
                          {"annulus_half_width", num(o.annulus_half_width)},
                          {"theta_center", o.theta_center ? num(*o.theta_center) : "peak"},
                          {"p_rec", std::to_string(o.radial.p_rec)},
                          {"support_fraction", num(o.radial.support_fraction)},
                          {"use_cross", o.radial.use_cross ? "true" : "false"},
                          {"l_fit", std::to_string(o.l_fit)}};
    const auto result = analyze_stack(frames_of(reader), info.grid, o);
    const fs::path& dir = global.out;

    switch (options.kind) {
    case ReconstructKind::radial: {
        const auto& cov = result.radial.cov;
        write_matrix_csv(dir / "cov.csv", cov.values, cov.coords, cov.coords);
        const auto& modes = result.radial.modes;
        std::vector<std::string> header{"theta"};
        for (Eigen::Index p = 0; p < modes.profiles.cols(); ++p)
            header.push_back("u_p" + std::to_string(p));
        CsvWriter profiles(dir / "modes_rec.csv", header);
        for (std::size_t j = 0; j < modes.theta.size(); ++j) {
            profiles.cell(modes.theta[j]);
            for (Eigen::Index p = 0; p < modes.profiles.cols(); ++p)
                profiles.cell(modes.profiles(static_cast<Eigen::Index>(j), p));
            profiles.end_row();
        }
        CsvWriter weights(dir / "weights_rec.csv", {"p", "Lambda", "singular_value"});
        for (std::size_t p = 0; p < modes.weights.size(); ++p)
            weights.cell(static_cast<int>(p)).cell(modes.weights[p]).cell(modes.singular_values[p]).end_row();
        break;
    }
    case ReconstructKind::oam: {
        const auto& prof = result.oam.profile;
        const auto& s = result.oam.spectrum;
        std::vector<double> raw;
        for (int l = 0; l <= s.l_fit; ++l) raw.push_back(s.weight(l) * std::sqrt(s.amplitude));
        const auto fitted = oam_model(raw, s.background, prof.dphi);
        CsvWriter c(dir / "c_dphi.csv", {"dphi", "C", "fit"});
        for (std::size_t i = 0; i < prof.dphi.size(); ++i)
            c.cell(prof.dphi[i]).cell(prof.values[i]).cell(fitted[i]).end_row();
        CsvWriter w(dir / "oam_weights.csv", {"l", "Lambda"});
        for (int l = 0; l <= s.l_fit; ++l) w.cell(l).cell(s.weight(l)).end_row();
        CsvWriter summary(dir / "oam_summary.csv",
                          {"K_oam", "theta_center", "background", "amplitude", "residual", "iterations"});
        summary.cell(s.K_oam).cell(result.oam.theta_center).cell(s.background).cell(s.amplitude);
        summary.cell(s.residual).cell(s.iterations).end_row();
        break;
    }
    case ReconstructKind::g2: {
        const auto& g = result.g2;
        CsvWriter csv(dir / "g2.csv", {"g2", "standard_error", "K", "samples"});
        csv.cell(g.g2).cell(g.standard_error);
        csv.cell(g.K ? num(*g.K) : std::string{});
        csv.cell(static_cast<long long>(g.samples)).end_row();
        break;
    }
    }
    finish_run(manifest, global);
    return result;
}

ScanResult cmd_scan(const GlobalOptions& global, const ScanOptions& options) {
    if (options.values.empty()) throw Error("empty scan range");
    const auto config = load_run_config(global);
    auto manifest = begin_run("scan", global, &config);
    std::string values;
    for (double v : options.values) values += (values.empty() ? "" : ",") + num(v);
    manifest.arguments = {{"variable", options.variable}, {"values", values}};
    ScanResult result;
    if (options.variable == "power")
        result = scan_power(config, options.values, global.threads);
    else if (options.variable == "distance")
        result = scan_distance(config, options.values, global.threads);
    else
        throw Error("unknown scan variable '" + options.variable + "' (power, distance)");
    write_scan(global.out, result);
    finish_run(manifest, global);
    return result;
}

void cmd_calibrate(const GlobalOptions& global, const CalibrateOptions& options) {
    const auto config = load_run_config(global);
    auto manifest = begin_run("calibrate", global, &config);
    manifest.arguments = {{"kind", options.kind}, {"data", options.data.string()}};
    const auto data = read_pairs_csv(options.data);
    if (options.kind == "gain") {
        const auto law = calibrate_gain(data);
        CsvWriter csv(global.out / "gain_law.csv", {"c", "amplitude", "residual"});
        csv.cell(law.c).cell(law.amplitude).cell(law.residual).end_row();
        CsvWriter points(global.out / "gain_points.csv", {"power", "intensity", "G0", "fit"});
        for (const auto& [p, i] : data) {
            const double g = law.gain(p);
            points.cell(p).cell(i).cell(g).cell(law.amplitude * std::pow(std::sinh(g), 2)).end_row();
        }
    } else if (options.kind == "kerr") {
        const double pi_distance = options.pi_distance.value_or(config.pi_distance);
        manifest.arguments.emplace_back("pi_distance", num(pi_distance));
        const auto k = kerr_calibration(data, pi_distance);
        CsvWriter csv(global.out / "kerr.csv", {"kappa", "intercept", "residual", "pi_distance"});
        csv.cell(k.kappa).cell(k.intercept).cell(k.residual).cell(pi_distance).end_row();
    } else {
        throw Error("unknown calibration '" + options.kind + "' (gain, kerr)");
    }
    finish_run(manifest, global);
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Spatial mode structure of two-crystal high-gain parametric down-conversion"};
    app.require_subcommand(1);

    GlobalOptions global;
    std::string config_path;
    app.add_option("--config", config_path, "config file (key = value)");
    app.add_option("--out", global.out, "output directory")->capture_default_str();
    app.add_option("--seed", global.seed, "random seed")->capture_default_str();
    app.add_option("--threads", global.threads, "worker cap, 0 = all cores")->capture_default_str();

    app.add_subcommand("decompose", "Schmidt modes, weights and mean intensity");

    SynthesizeOptions synth;
    std::string mode = "degenerate";
    auto* synth_cmd = app.add_subcommand("synthesize", "single-shot frame stack");
    synth_cmd->add_option("-n,--frames", synth.frames, "number of frames")->capture_default_str();
    synth_cmd->add_option("--mode", mode, "degenerate or signal_only")->capture_default_str();
    synth_cmd->add_flag("--normalize", synth.normalize, "scale each frame to unit integral");
    synth_cmd->add_option("--name", synth.name, "stack file name")->capture_default_str();
    synth_cmd->add_option("--preview", synth.preview, "frames exported as PGM")->capture_default_str();

    ReconstructOptions rec;
    std::string kind = "radial";
    std::optional<double> theta_center;
    auto* rec_cmd = app.add_subcommand("reconstruct", "mode recovery from a frame stack");
    rec_cmd->add_option("stack", rec.stack, "stack file")->required();
    rec_cmd->add_option("--kind", kind, "radial, oam or g2")->capture_default_str();
    rec_cmd->add_option("--l-fit", rec.analysis.l_fit, "highest fitted |l|")->capture_default_str();
    rec_cmd->add_option("--p-rec", rec.analysis.radial.p_rec, "recovered radial modes")
        ->capture_default_str();
    rec_cmd->add_option("--theta-center", theta_center, "annulus centre (rad)");
    rec_cmd->add_option("--annulus-width", rec.analysis.annulus_half_width, "annulus half width (rad)")
        ->capture_default_str();
    rec_cmd->add_option("--sector-angle", rec.analysis.sector_half_angle, "sector half angle (rad)")
        ->capture_default_str();
    rec_cmd->add_flag("--cross", rec.analysis.radial.use_cross, "use the cross-correlation quadrant");

    ScanOptions scan;
    double from = 0, to = -1, step = 0;
    std::vector<double> values;
    auto* scan_cmd = app.add_subcommand("scan", "mode counts versus pump power or gap distance");
    scan_cmd->add_option("variable", scan.variable, "power or distance")->required();
    scan_cmd->add_option("--from", from, "first value");
    scan_cmd->add_option("--to", to, "last value (inclusive)");
    scan_cmd->add_option("--step", step, "increment");
    scan_cmd->add_option("--values", values, "explicit values")->delimiter(',');

    CalibrateOptions cal;
    auto* cal_cmd = app.add_subcommand("calibrate", "gain law or Kerr slope from measurements");
    cal_cmd->add_option("kind", cal.kind, "gain or kerr")->required();
    cal_cmd->add_option("--data", cal.data, "two-column CSV: P,I or P,L_min")->required();
    cal_cmd->add_option("--pi-distance", cal.pi_distance, "L_pi (m), default from config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (!config_path.empty()) global.config_path = config_path;

    try {
        if (app.got_subcommand("decompose")) {
            cmd_decompose(global);
        } else if (app.got_subcommand(synth_cmd)) {
            synth.mode = parse_detection_mode(mode);
            std::cout << cmd_synthesize(global, synth).string() << "\n";
        } else if (app.got_subcommand(rec_cmd)) {
            rec.kind = parse_reconstruct_kind(kind);
            rec.analysis.theta_center = theta_center;
            cmd_reconstruct(global, rec);
        } else if (app.got_subcommand(scan_cmd)) {
            if (!values.empty() && scan_cmd->count("--from"))
                throw Error("give either --values or --from/--to/--step");
            scan.values = values.empty() ? scan_range(from, to, step) : values;
            const auto result = cmd_scan(global, scan);
            for (const auto& pt : result.points)
                std::cout << num(pt.value) << "  K=" << num(pt.K) << "  K_oam=" << num(pt.K_oam)
                          << "\n";
        } else if (app.got_subcommand(cal_cmd)) {
            cmd_calibrate(global, cal);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace pdcmodes

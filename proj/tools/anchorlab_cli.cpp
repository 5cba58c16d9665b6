// anchorlab: KITTI label toolkit around the deterministic pieces of a
// Faster-R-CNN road-object detector: label validation, anchor-shape
// optimization, CNN dimension arithmetic, detection evaluation and a
// synthetic detector for closed-loop testing.
//
// exit codes: 0 success, 1 usage error, 2 data error

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "anchorlab/anchors.hpp"
#include "anchorlab/box.hpp"
#include "anchorlab/eval.hpp"
#include "anchorlab/kitti.hpp"
#include "anchorlab/net.hpp"
#include "anchorlab/parallel.hpp"
#include "anchorlab/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
    int threads = 1;
    std::string output_dir;
    std::string format = "text";
};

std::string fmt_fixed(double value, int precision) {
    char buf[64];
    auto [ptr, ec] =
        std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, precision);
    return std::string(buf, ptr);
}

// shortest representation that round-trips; locale independent
std::string fmt_shortest(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::pair<int, int> parse_dims(const std::string& text) {
    const auto x = text.find('x');
    int w = 0;
    int h = 0;
    if (x != std::string::npos) {
        const char* begin = text.data();
        auto r1 = std::from_chars(begin, begin + x, w);
        auto r2 = std::from_chars(begin + x + 1, begin + text.size(), h);
        if (r1.ec == std::errc{} && r2.ec == std::errc{} && r1.ptr == begin + x &&
            r2.ptr == begin + text.size() && w > 0 && h > 0) {
            return {w, h};
        }
    }
    throw CLI::ValidationError("expected dimensions as WxH, got '" + text + "'");
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

/*----------------------------------------------------------------------
  validate: parse every label file of a directory, report errors + counts
----------------------------------------------------------------------*/

struct ValidateOptions {
    std::string dir;
};

int run_validate(const ValidateOptions& opt, const GlobalOptions& global) {
    const auto frames = anchorlab::list_frame_files(opt.dir);

    struct FileOutcome {
        std::string name;
        bool ok = true;
        std::size_t error_line = 0;
        std::string error;
        std::vector<anchorlab::GroundTruthObject> objects;
    };
    std::vector<FileOutcome> outcomes(frames.size());
    anchorlab::parallel_for(frames.size(), global.threads, [&](std::size_t i) {
        outcomes[i].name = frames[i].path.string();
        try {
            outcomes[i].objects = anchorlab::read_label_file(frames[i].path);
        } catch (const anchorlab::parse_error& e) {
            outcomes[i].ok = false;
            outcomes[i].error_line = e.line();
            outcomes[i].error = e.what();
        }
    });

    std::size_t failed = 0;
    std::size_t total_objects = 0;
    std::map<std::string, std::size_t> class_counts;
    for (const FileOutcome& f : outcomes) {
        if (!f.ok) {
            ++failed;
            continue;
        }
        total_objects += f.objects.size();
        for (const auto& obj : f.objects) ++class_counts[obj.class_name];
    }

    if (global.format == "json") {
        json doc;
        doc["files"] = frames.size();
        doc["ok"] = frames.size() - failed;
        doc["failed"] = failed;
        doc["objects"] = total_objects;
        doc["classes"] = class_counts;
        doc["errors"] = json::array();
        for (const FileOutcome& f : outcomes) {
            if (!f.ok) doc["errors"].push_back({{"file", f.name}, {"message", f.error}});
        }
        std::cout << doc.dump(2) << "\n";
    } else if (global.format == "csv") {
        std::cout << "file,line,message\n";
        for (const FileOutcome& f : outcomes) {
            if (!f.ok) std::cout << f.name << "," << f.error_line << ",\"" << f.error << "\"\n";
        }
    } else {
        for (const FileOutcome& f : outcomes) {
            if (!f.ok) std::cout << "ERROR " << f.error << "\n";
        }
        std::cout << "files: " << frames.size() << "  ok: " << frames.size() - failed
                  << "  failed: " << failed << "  objects: " << total_objects << "\n";
        for (const auto& [name, count] : class_counts) {
            std::cout << "  " << name << ": " << count << "\n";
        }
    }
    return failed == 0 ? 0 : 2;
}

/*----------------------------------------------------------------------
  anchors: K-Means anchor shapes from ground-truth boxes
----------------------------------------------------------------------*/

struct AnchorsOptions {
    std::string labels_dir;
    std::string class_name = "Car";
    int k = 9;
    std::uint64_t seed = 1;
    int max_iter = 100;
    double tol = 1e-6;
    std::string difficulty_filter = "all";
};

int run_anchors(const AnchorsOptions& opt, const GlobalOptions& global) {
    std::vector<anchorlab::AnchorShape> observations;
    for (const auto& frame : anchorlab::list_frame_files(opt.labels_dir)) {
        for (const auto& obj : anchorlab::read_label_file(frame.path)) {
            if (obj.dont_care() || obj.class_name != opt.class_name) continue;
            if (opt.difficulty_filter != "all") {
                const auto bin = anchorlab::classify_difficulty(obj);
                const int limit = opt.difficulty_filter == "easy"       ? 0
                                  : opt.difficulty_filter == "moderate" ? 1
                                                                        : 2;
                if (static_cast<int>(bin) > limit) continue;
            }
            observations.push_back({obj.bbox.width(), obj.bbox.height()});
        }
    }

    const auto result =
        anchorlab::kmeans_anchor_shapes(observations, opt.k, opt.seed, opt.max_iter, opt.tol);
    auto shapes = result.shapes;
    std::sort(shapes.begin(), shapes.end(),
              [](const anchorlab::AnchorShape& a, const anchorlab::AnchorShape& b) {
                  const double aa = a.width * a.height;
                  const double bb = b.width * b.height;
                  return aa != bb ? aa < bb : a.width < b.width;
              });
    const double euclidean = anchorlab::euclidean_distance_sum(observations, shapes);

    if (!global.output_dir.empty()) {
        fs::create_directories(global.output_dir);
        auto shape_csv = open_output(fs::path(global.output_dir) / "anchor_shapes.csv");
        shape_csv << "width,height\n";
        for (const auto& s : shapes) {
            shape_csv << fmt_shortest(s.width) << "," << fmt_shortest(s.height) << "\n";
        }
        // scatter of every observation, for reproducing the shape-distribution plot
        auto obs_csv = open_output(fs::path(global.output_dir) / "shape_observations.csv");
        obs_csv << "width,height\n";
        for (const auto& o : observations) {
            obs_csv << fmt_shortest(o.width) << "," << fmt_shortest(o.height) << "\n";
        }
    }

    if (global.format == "json") {
        json doc;
        doc["observations"] = observations.size();
        doc["k"] = opt.k;
        doc["seed"] = opt.seed;
        doc["iterations"] = result.iterations;
        doc["converged"] = result.converged;
        doc["squared_objective"] = result.objective;
        doc["euclidean_distance_sum"] = euclidean;
        doc["shapes"] = json::array();
        for (const auto& s : shapes) {
            doc["shapes"].push_back({{"width", s.width}, {"height", s.height}});
        }
        std::cout << doc.dump(2) << "\n";
    } else if (global.format == "csv") {
        std::cout << "width,height\n";
        for (const auto& s : shapes) {
            std::cout << fmt_shortest(s.width) << "," << fmt_shortest(s.height) << "\n";
        }
    } else {
        std::cout << "observations: " << observations.size() << "\n"
                  << "k: " << opt.k << "  seed: " << opt.seed
                  << "  iterations: " << result.iterations
                  << "  converged: " << (result.converged ? "yes" : "no") << "\n"
                  << "squared objective: " << fmt_fixed(result.objective, 3) << "\n"
                  << "euclidean distance sum: " << fmt_fixed(euclidean, 3) << "\n"
                  << "shapes (width x height):\n";
        for (const auto& s : shapes) {
            std::cout << "  " << fmt_fixed(s.width, 2) << " x " << fmt_fixed(s.height, 2) << "\n";
        }
    }
    return 0;
}

/*----------------------------------------------------------------------
  netinfo: per-layer dimension/stride/memory table
----------------------------------------------------------------------*/

struct NetinfoOptions {
    std::string net = "vgg16";
    std::string input;
    std::string layer;
    int bytes_per_elem = 4;
    double train_multiplier = 2.0;
};

int run_netinfo(const NetinfoOptions& opt, const GlobalOptions& global) {
    const auto [in_w, in_h] = parse_dims(opt.input);
    const anchorlab::NetSpec net = anchorlab::builtin_net(opt.net);
    const anchorlab::LayerReport report = anchorlab::layer_dims(net, in_w, in_h);

    auto layer_mb = [&](const anchorlab::LayerDims& l) {
        return static_cast<double>(l.bytes(opt.bytes_per_elem)) / 1e6;
    };

    if (global.format == "json") {
        json doc;
        doc["net"] = opt.net;
        doc["input"] = {{"width", in_w}, {"height", in_h}};
        doc["layers"] = json::array();
        for (const auto& l : report.layers) {
            doc["layers"].push_back({{"name", l.name},
                                     {"kind", l.kind == anchorlab::LayerKind::Conv ? "conv" : "pool"},
                                     {"out_w", l.width},
                                     {"out_h", l.height},
                                     {"stride", l.cumulative_stride},
                                     {"elements", l.elements},
                                     {"megabytes", layer_mb(l)}});
        }
        if (!opt.layer.empty()) {
            json summary;
            summary["layer"] = opt.layer;
            summary["feature_stride"] = anchorlab::feature_stride(net, opt.layer);
            try {
                const auto window = anchorlab::roi_pool_window(net, opt.layer);
                summary["roi_pool_window"] = {{"width", window.first}, {"height", window.second}};
            } catch (const std::invalid_argument&) {
                // no window defined for this layer
            }
            summary["activation_bytes"] = anchorlab::estimate_activation_memory(
                net, opt.layer, in_w, in_h, opt.bytes_per_elem, opt.train_multiplier);
            summary["training_multiplier"] = opt.train_multiplier;
            doc["summary"] = summary;
        }
        std::cout << doc.dump(2) << "\n";
        return 0;
    }

    if (global.format == "csv") {
        std::cout << "layer,kind,out_w,out_h,stride,elements,megabytes\n";
        for (const auto& l : report.layers) {
            std::cout << l.name << "," << (l.kind == anchorlab::LayerKind::Conv ? "conv" : "pool")
                      << "," << l.width << "," << l.height << "," << l.cumulative_stride << ","
                      << l.elements << "," << fmt_fixed(layer_mb(l), 2) << "\n";
        }
    } else {
        char row[160];
        std::snprintf(row, sizeof(row), "%-10s %-5s %7s %7s %7s %12s %10s\n", "layer", "kind",
                      "out_w", "out_h", "stride", "elements", "MB");
        std::cout << row;
        for (const auto& l : report.layers) {
            std::snprintf(row, sizeof(row), "%-10s %-5s %7d %7d %7lld %12lld %10s\n",
                          l.name.c_str(), l.kind == anchorlab::LayerKind::Conv ? "conv" : "pool",
                          l.width, l.height, static_cast<long long>(l.cumulative_stride),
                          static_cast<long long>(l.elements), fmt_fixed(layer_mb(l), 2).c_str());
            std::cout << row;
        }
    }

    if (!opt.layer.empty()) {
        const auto stride = anchorlab::feature_stride(net, opt.layer);
        const double bytes = anchorlab::estimate_activation_memory(
            net, opt.layer, in_w, in_h, opt.bytes_per_elem, opt.train_multiplier);
        std::cout << "feature stride at " << opt.layer << ": " << stride << "\n";
        try {
            const auto window = anchorlab::roi_pool_window(net, opt.layer);
            std::cout << "roi pool window: " << window.first << "x" << window.second << "\n";
        } catch (const std::invalid_argument&) {
        }
        std::cout << "activation memory up to " << opt.layer << " (x"
                  << fmt_shortest(opt.train_multiplier) << " training): " << fmt_fixed(bytes, 0)
                  << " bytes (" << fmt_fixed(bytes / 1e9, 2) << " GB)\n";
    }
    return 0;
}

/*----------------------------------------------------------------------
  eval: AP table + PR curve CSV files
----------------------------------------------------------------------*/

struct EvalOptions {
    std::string gt_dir;
    std::string det_dir;
    std::string class_name = "Car";
    double iou = 0.7;
    std::string interp = "r11";
};

void write_pr_csv(const fs::path& path, const anchorlab::PRCurve& curve) {
    auto out = open_output(path);
    out << "threshold,recall,precision\n";
    for (const auto& p : curve.points) {
        out << fmt_shortest(p.threshold) << "," << fmt_shortest(p.recall) << ","
            << fmt_shortest(p.precision) << "\n";
    }
}

int run_eval(const EvalOptions& opt, const GlobalOptions& global) {
    const auto interp = opt.interp == "r40" ? anchorlab::Interpolation::R40
                                            : anchorlab::Interpolation::R11;
    const auto report = anchorlab::evaluate_dataset(opt.det_dir, opt.gt_dir, opt.class_name,
                                                    opt.iou, interp, global.threads);
    for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path out_dir = global.output_dir.empty() ? fs::path(".") : fs::path(global.output_dir);
    fs::create_directories(out_dir);
    write_pr_csv(out_dir / "pr_easy.csv", report.easy.curve);
    write_pr_csv(out_dir / "pr_moderate.csv", report.moderate.curve);
    write_pr_csv(out_dir / "pr_hard.csv", report.hard.curve);

    const anchorlab::BinReport* bins[] = {&report.easy, &report.moderate, &report.hard};
    if (global.format == "json") {
        json doc;
        doc["class"] = opt.class_name;
        doc["iou_threshold"] = opt.iou;
        doc["interpolation"] = opt.interp;
        for (const auto* bin : bins) {
            doc["bins"][anchorlab::to_string(bin->difficulty)] = {{"ap", bin->ap},
                                                                  {"gt", bin->gt},
                                                                  {"tp", bin->tp},
                                                                  {"fp", bin->fp},
                                                                  {"ignored", bin->ignored}};
        }
        std::cout << doc.dump(2) << "\n";
    } else if (global.format == "csv") {
        std::cout << "difficulty,ap,gt,tp,fp,ignored\n";
        for (const auto* bin : bins) {
            std::cout << anchorlab::to_string(bin->difficulty) << "," << fmt_shortest(bin->ap)
                      << "," << bin->gt << "," << bin->tp << "," << bin->fp << "," << bin->ignored
                      << "\n";
        }
    } else {
        std::cout << "class: " << opt.class_name << "  iou: " << fmt_fixed(opt.iou, 2)
                  << "  interpolation: " << (interp == anchorlab::Interpolation::R11 ? "R11" : "R40")
                  << "\n";
        char row[128];
        std::snprintf(row, sizeof(row), "%-10s %8s %6s %6s %6s %8s\n", "difficulty", "AP", "gt",
                      "tp", "fp", "ignored");
        std::cout << row;
        for (const auto* bin : bins) {
            std::snprintf(row, sizeof(row), "%-10s %8s %6zu %6zu %6zu %8zu\n",
                          anchorlab::to_string(bin->difficulty), fmt_fixed(bin->ap, 4).c_str(),
                          bin->gt, bin->tp, bin->fp, bin->ignored);
            std::cout << row;
        }
    }
    return 0;
}

/*----------------------------------------------------------------------
  synth: perturb ground truth into synthetic detection files
----------------------------------------------------------------------*/

struct SynthOptions {
    std::string gt_dir;
    double center_noise = 0.0;
    double scale_noise = 0.0;
    double drop_rate = 0.0;
    double fp_rate = 0.0;
    std::string score_model = "iou";
    std::uint64_t seed = 0;
    std::string image = "1242x375";
};

int run_synth(const SynthOptions& opt, const GlobalOptions& global) {
    const auto [img_w, img_h] = parse_dims(opt.image);
    anchorlab::PerturbConfig config;
    config.center_noise_sigma = opt.center_noise;
    config.scale_noise_sigma = opt.scale_noise;
    config.drop_rate = opt.drop_rate;
    config.false_positive_rate = opt.fp_rate;
    config.score_model = opt.score_model == "random" ? anchorlab::ScoreModel::Random
                                                     : anchorlab::ScoreModel::IouBased;
    config.seed = opt.seed;
    config.image_width = img_w;
    config.image_height = img_h;

    const std::size_t frames = anchorlab::list_frame_files(opt.gt_dir).size();
    const std::size_t written = anchorlab::perturb(opt.gt_dir, global.output_dir, config);
    if (global.format == "json") {
        json doc;
        doc["frames"] = frames;
        doc["detections"] = written;
        doc["output_dir"] = global.output_dir;
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "frames: " << frames << "  detections: " << written << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KITTI road-object detection toolkit: labels, anchors, CNN geometry, AP"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    app.add_option("--threads", global.threads, "worker threads for per-file stages")
        ->envname("ANCHORLAB_THREADS")
        ->check(CLI::PositiveNumber);
    app.add_option("--output-dir", global.output_dir, "directory for generated files");
    app.add_option("--format", global.format, "output format")
        ->check(CLI::IsMember({"text", "csv", "json"}));

    int exit_code = 0;

    ValidateOptions validate_opt;
    auto* validate = app.add_subcommand("validate", "parse a label directory and report errors");
    validate->add_option("dir", validate_opt.dir, "label directory")->required();
    validate->callback([&] { exit_code = run_validate(validate_opt, global); });

    AnchorsOptions anchors_opt;
    auto* anchors = app.add_subcommand("anchors", "K-Means anchor shapes from ground-truth boxes");
    anchors->add_option("--labels", anchors_opt.labels_dir, "label directory")->required();
    anchors->add_option("--class", anchors_opt.class_name, "object class to cluster");
    anchors->add_option("--k", anchors_opt.k, "number of anchors")->check(CLI::PositiveNumber);
    anchors->add_option("--seed", anchors_opt.seed, "PRNG seed");
    anchors->add_option("--max-iter", anchors_opt.max_iter, "iteration cap")
        ->check(CLI::PositiveNumber);
    anchors->add_option("--tol", anchors_opt.tol, "centroid movement tolerance");
    anchors->add_option("--difficulty-filter", anchors_opt.difficulty_filter,
                        "restrict observations to a difficulty bin and easier")
        ->check(CLI::IsMember({"all", "easy", "moderate", "hard"}));
    anchors->callback([&] { exit_code = run_anchors(anchors_opt, global); });

    NetinfoOptions netinfo_opt;
    auto* netinfo = app.add_subcommand("netinfo", "per-layer dims, strides and activation memory");
    netinfo->add_option("--net", netinfo_opt.net, "network name")
        ->check(CLI::IsMember({"vgg16", "alexnet"}));
    netinfo->add_option("--input", netinfo_opt.input, "input size WxH")->required();
    netinfo->add_option("--layer", netinfo_opt.layer, "summarize stride/window/memory at a layer");
    netinfo->add_option("--bytes-per-elem", netinfo_opt.bytes_per_elem, "bytes per activation")
        ->check(CLI::PositiveNumber);
    netinfo->add_option("--train-multiplier", netinfo_opt.train_multiplier,
                        "multiplier modeling training-time storage");
    netinfo->callback([&] { exit_code = run_netinfo(netinfo_opt, global); });

    EvalOptions eval_opt;
    auto* eval = app.add_subcommand("eval", "KITTI-protocol AP per difficulty bin");
    eval->add_option("--gt", eval_opt.gt_dir, "ground-truth label directory")->required();
    eval->add_option("--det", eval_opt.det_dir, "detection result directory")->required();
    eval->add_option("--class", eval_opt.class_name, "object class");
    eval->add_option("--iou", eval_opt.iou, "IoU threshold for a true positive");
    eval->add_option("--interp", eval_opt.interp, "AP interpolation")
        ->check(CLI::IsMember({"r11", "r40"}));
    eval->callback([&] { exit_code = run_eval(eval_opt, global); });

    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "generate detections by perturbing ground truth");
    synth->add_option("--gt", synth_opt.gt_dir, "ground-truth label directory")->required();
    synth->add_option("--center-noise", synth_opt.center_noise, "center jitter sigma, pixels");
    synth->add_option("--scale-noise", synth_opt.scale_noise, "log-scale size jitter sigma");
    synth->add_option("--drop-rate", synth_opt.drop_rate, "probability of dropping a box");
    synth->add_option("--fp-rate", synth_opt.fp_rate, "expected spurious boxes per image");
    synth->add_option("--score-model", synth_opt.score_model, "score assignment")
        ->check(CLI::IsMember({"iou", "random"}));
    synth->add_option("--seed", synth_opt.seed, "PRNG seed");
    synth->add_option("--image", synth_opt.image, "image size WxH for clipping");
    synth->callback([&] {
        if (global.output_dir.empty()) {
            throw CLI::RequiredError("synth: --output-dir");
        }
        exit_code = run_synth(synth_opt, global);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}

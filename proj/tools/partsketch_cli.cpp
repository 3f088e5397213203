// partsketch command-line front end.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "partsketch/adjacency.hpp"
#include "partsketch/evaluate.hpp"
#include "partsketch/gmm_json.hpp"
#include "partsketch/mesh.hpp"
#include "partsketch/metrics.hpp"
#include "partsketch/raster.hpp"
#include "partsketch/service.hpp"
#include "partsketch/training.hpp"
#include "httplib.h"

using namespace partsketch;
using nlohmann::json;

namespace {

std::vector<View> parse_views(const std::string& s) {
  std::vector<View> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_view(item));
  return out;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") std::cout << text;
  else write_text_file(path, text);
}

std::string mesh_text(const ShapeGMM& shape, std::size_t res) {
  auto m = extract_mesh(shape, res);
  return m ? to_obj(*m) : std::string();
}

bool is_obj(const std::string& path) { return std::filesystem::path(path).extension() == ".obj"; }

TriMesh load_mesh_any(const std::string& path, std::size_t res) {
  if (is_obj(path)) return parse_obj(read_text_file(path));
  auto m = extract_mesh(load_shape(path), res);
  if (!m) throw MetricError(path + ": shape has no surface");
  return *m;
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partsketch: sketch-to-GMM shape generation, editing and evaluation"};
  app.require_subcommand(1);

  // datagen
  auto* dg = app.add_subcommand("datagen", "write a procedural dataset");
  std::string dg_out, dg_cat = "chair", dg_views = "front,side,three-quarter";
  DatasetConfig dcfg;
  dg->add_option("--out", dg_out, "output directory")->required();
  dg->add_option("--category", dg_cat, "chair | airplane | lamp");
  dg->add_option("--count", dcfg.count, "number of samples");
  dg->add_option("--seed", dcfg.seed, "dataset seed");
  dg->add_option("--views", dg_views, "comma-separated views");
  dg->add_option("--side", dcfg.render.side, "sketch side in pixels");
  dg->add_option("--jitter", dcfg.render.jitter, "stroke jitter amplitude (pixels)");
  dg->add_option("--latent-width", dcfg.latent_width, "latent width");

  // train
  auto* tr = app.add_subcommand("train", "train a model on a dataset");
  std::string tr_data, tr_out, tr_style = "single-sentence", tr_log, tr_assign = "per-shape";
  ModelConfig mcfg;
  TrainConfig tcfg;
  bool no_text = false, no_isg = false;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--epochs", tcfg.epochs, "epochs");
  tr->add_option("--max-steps", tcfg.max_steps, "stop after this many steps (overrides epochs)");
  tr->add_option("--batch", tcfg.batch, "batch size");
  tr->add_option("--lr", tcfg.peak_lr, "peak learning rate");
  tr->add_option("--seed", tcfg.seed, "shuffle seed");
  tr->add_option("--model-seed", mcfg.seed, "parameter init seed");
  tr->add_option("--alpha", mcfg.alpha, "IndivGCN/PartGCN fusion weight");
  tr->add_option("--blocks", mcfg.blocks, "decoder blocks");
  tr->add_option("--heads", mcfg.heads, "attention heads");
  tr->add_option("--d", mcfg.d, "model width");
  tr->add_option("--clusters", mcfg.clusters, "part clusters K");
  tr->add_option("--style", tr_style, "part-type | single-sentence | verbose");
  tr->add_option("--assignment", tr_assign, "per-shape | template");
  tr->add_flag("--no-text", no_text, "disable the text branch");
  tr->add_flag("--no-isg", no_isg, "disable the graph refinement");
  tr->add_flag("--parallel-cross", mcfg.parallel_cross, "visual and text cross-attention in parallel");
  tr->add_option("--log", tr_log, "per-step JSON lines");

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset");
  std::string ev_data, ev_ckpt, ev_report;
  MetricOptions ev_opt;
  bool ev_no_fid = false;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--report", ev_report, "report JSON path");
  ev->add_option("--points", ev_opt.points, "surface samples per shape");
  ev->add_option("--subsample", ev_opt.emd_subsample, "points used for the exact EMD");
  ev->add_option("--seed", ev_opt.seed, "sampling seed");
  ev->add_flag("--no-fid", ev_no_fid, "skip FID-lite");

  // generate
  auto* gen = app.add_subcommand("generate", "sketch (+ description) to GMM");
  std::string gen_ckpt, gen_sketch, gen_desc, gen_gmm, gen_obj;
  gen->add_option("--ckpt", gen_ckpt, "checkpoint")->required();
  gen->add_option("--sketch", gen_sketch, "grayscale PNG")->required();
  gen->add_option("--desc", gen_desc, "part description JSON");
  gen->add_option("--out", gen_gmm, "GMM JSON output (default stdout)");
  gen->add_option("--obj", gen_obj, "also write the mesh");

  // edit
  auto* ed = app.add_subcommand("edit", "apply an edit script to a GMM");
  std::string ed_gmm, ed_script, ed_out, ed_obj;
  ed->add_option("--gmm", ed_gmm, "input GMM JSON")->required();
  ed->add_option("--script", ed_script, "JSON array of edits")->required();
  ed->add_option("--out", ed_out, "output GMM JSON (default stdout)");
  ed->add_option("--obj", ed_obj, "also write the mesh");

  // export-obj
  auto* ex = app.add_subcommand("export-obj", "extract a mesh from a GMM");
  std::string ex_gmm, ex_out;
  std::size_t ex_res = 48;
  ex->add_option("--gmm", ex_gmm, "GMM JSON")->required();
  ex->add_option("--out", ex_out, "OBJ path (default stdout)");
  ex->add_option("--resolution", ex_res, "grid cells per axis");

  // cluster-dump
  auto* cd = app.add_subcommand("cluster-dump", "dendrogram and part assignment of a GMM");
  std::string cd_gmm, cd_out, cd_link = "average";
  std::size_t cd_k = 4;
  cd->add_option("--gmm", cd_gmm, "GMM JSON")->required();
  cd->add_option("--k", cd_k, "clusters");
  cd->add_option("--linkage", cd_link, "average | single | complete");
  cd->add_option("--out", cd_out, "output JSON (default stdout)");

  // metrics
  auto* mt = app.add_subcommand("metrics", "CD, EMD and FID-lite between two shapes");
  std::string mt_a, mt_b, mt_report;
  MetricOptions mt_opt;
  bool mt_no_fid = false;
  mt->add_option("a", mt_a, "OBJ or GMM JSON")->required();
  mt->add_option("b", mt_b, "OBJ or GMM JSON")->required();
  mt->add_option("--points", mt_opt.points, "surface samples");
  mt->add_option("--subsample", mt_opt.emd_subsample, "points used for the exact EMD");
  mt->add_option("--seed", mt_opt.seed, "sampling seed");
  mt->add_option("--resolution", mt_opt.resolution, "mesh resolution for GMM inputs");
  mt->add_flag("--no-fid", mt_no_fid, "skip FID-lite");
  mt->add_option("--report", mt_report, "report path (default stdout)");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP service for generation and editing");
  std::string sv_ckpt, sv_host = "127.0.0.1", sv_snapshot;
  int sv_port = 8080;
  sv->add_option("--ckpt", sv_ckpt, "checkpoint (optional; /generate returns 409 without it)");
  sv->add_option("--port", sv_port, "port");
  sv->add_option("--host", sv_host, "bind address");
  sv->add_option("--snapshot", sv_snapshot, "session snapshot file, loaded at start and written on shutdown");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*dg) {
      dcfg.category = parse_category(dg_cat);
      dcfg.views = parse_views(dg_views);
      std::filesystem::create_directories(dg_out);
      write_dataset(dg_out, dcfg);
      std::cerr << "wrote " << dcfg.count << " samples to " << dg_out << "\n";
    } else if (*tr) {
      Dataset ds = read_dataset(tr_data);
      mcfg.category = ds.config.category;
      mcfg.latent_width = ds.config.latent_width;
      mcfg.sketch_side = ds.config.render.side;
      mcfg.style = parse_text_style(tr_style);
      mcfg.use_text = !no_text;
      mcfg.use_isg = !no_isg;
      if (tr_assign == "template") tcfg.assignment = AssignmentSource::Template;
      else if (tr_assign != "per-shape") throw std::invalid_argument("unknown assignment '" + tr_assign + "'");
      std::unique_ptr<std::ofstream> log;
      if (!tr_log.empty()) log = std::make_unique<std::ofstream>(tr_log);
      const std::size_t total = total_steps(ds.samples.size(), tcfg);
      auto result = train(ds.samples, mcfg, tcfg, [&](const StepLog& l) {
        if (log)
          *log << json{{"step", l.step}, {"epoch", l.epoch}, {"lr", l.lr}, {"align", l.loss.align},
                       {"indiv", l.loss.indiv}, {"part", l.loss.part}, {"total", l.loss.total}}.dump()
               << "\n";
        if (l.step % 50 == 0 || l.step + 1 == total)
          std::fprintf(stderr, "step %zu/%zu epoch %zu lr %.3g total %.5f align %.5f indiv %.5f part %.5f\n", l.step + 1,
                       total, l.epoch, l.lr, l.loss.total, l.loss.align, l.loss.indiv, l.loss.part);
      });
      json extra{{"train", {{"batch", tcfg.batch}, {"peak_lr", tcfg.peak_lr}, {"steps", total}, {"seed", tcfg.seed}}},
                 {"data", tr_data}};
      save_checkpoint(tr_out, result.model, extra);
      std::cout << json{{"checkpoint", tr_out}, {"hash", checkpoint_hash(result.model)}}.dump() << "\n";
    } else if (*ev) {
      Model m = load_checkpoint(ev_ckpt);
      Dataset ds = read_dataset(ev_data);
      ev_opt.with_fid = !ev_no_fid;
      json report = eval_to_json(evaluate(m, ds.samples, ev_opt));
      report["checkpoint"] = checkpoint_hash(m);
      write_or_print(ev_report, report.dump(2) + "\n");
    } else if (*gen) {
      Model m = load_checkpoint(gen_ckpt);
      std::optional<PartDescription> desc;
      if (!gen_desc.empty()) desc = desc_from_json(json::parse(read_text_file(gen_desc)));
      const ShapeGMM shape = predict_shape(m, read_png(gen_sketch), desc);
      write_or_print(gen_gmm, shape_to_json(shape).dump(2) + "\n");
      if (!gen_obj.empty()) write_text_file(gen_obj, mesh_text(shape, 48));
    } else if (*ed) {
      ShapeGMM shape = load_shape(ed_gmm);
      const json script = json::parse(read_text_file(ed_script));
      if (!script.is_array()) throw EditError("edit script must be a JSON array");
      std::vector<EditOp> history;
      for (const auto& e : script) history.push_back(edit_from_json(e));
      shape = replay(shape, history);
      write_or_print(ed_out, shape_to_json(shape).dump(2) + "\n");
      if (!ed_obj.empty()) write_text_file(ed_obj, mesh_text(shape, 48));
    } else if (*ex) {
      write_or_print(ex_out, mesh_text(load_shape(ex_gmm), ex_res));
    } else if (*cd) {
      const ShapeGMM shape = load_shape(cd_gmm);
      const Dendrogram d = build_dendrogram(pseudo_adjacency(all_means(shape)), parse_linkage(cd_link));
      write_or_print(cd_out, json{{"dendrogram", dendrogram_to_json(d)}, {"assignment", assignment_to_json(d.cut(cd_k))}}.dump(2) + "\n");
    } else if (*mt) {
      mt_opt.with_fid = !mt_no_fid;
      const auto r = mesh_metrics(load_mesh_any(mt_a, mt_opt.resolution), load_mesh_any(mt_b, mt_opt.resolution), mt_opt);
      write_or_print(mt_report, report_to_json(r).dump(2) + "\n");
    } else if (*sv) {
      ServiceOptions so;
      if (!sv_snapshot.empty()) so.snapshot_path = sv_snapshot;
      Service svc(so);
      if (!sv_ckpt.empty()) svc.load_model(load_checkpoint(sv_ckpt));
      if (!sv_snapshot.empty() && std::filesystem::exists(sv_snapshot))
        svc.restore_snapshot(json::parse(read_text_file(sv_snapshot)));
      auto server = make_http_server(svc);
      g_server = server.get();
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << sv_host << ":" << sv_port
                << (svc.has_model() ? " (checkpoint " + svc.checkpoint_hash() + ")" : " (no checkpoint)") << "\n";
      if (!server->listen(sv_host, sv_port)) {
        std::cerr << "error: cannot listen on " << sv_host << ":" << sv_port << "\n";
        return 1;
      }
      g_server = nullptr;
      svc.save_snapshot();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

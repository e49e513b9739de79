#include "patchwork/annotation_service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "patchwork/base64.hpp"
#include "patchwork/error.hpp"
#include "patchwork/raster_io.hpp"

namespace patchwork {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string query(const httplib::Request& req, const std::string& key, const std::string& fallback) {
  return req.has_param(key) ? req.get_param_value(key) : fallback;
}

}  // namespace

AnnotationService::AnnotationService(AnnotationStore& store, const PatchSampler& sampler,
                                     SheetCache& sheets, Options options)
    : store_(store),
      sampler_(sampler),
      sheets_(sheets),
      options_(options),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

AnnotationService::AnnotationService(AnnotationStore& store, const PatchSampler& sampler,
                                     SheetCache& sheets)
    : AnnotationService(store, sampler, sheets, Options{}) {}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (server_->bind_to_port(host, port)) {
    bound = port;
  }
  if (bound < 0) {
    throw ConfigError("cannot bind annotation service to " + host + ":" + std::to_string(port));
  }
  return bound;
}

void AnnotationService::serve() { server_->listen_after_bind(); }

void AnnotationService::stop() {
  if (server_) server_->stop();
}

void AnnotationService::install_routes() {
  server_->Get("/api/schema", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, store_.schema().to_json());
  });

  server_->Get("/api/next", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      SamplingStrategy strategy;
      strategy.kind = parse_strategy(query(req, "strategy", "random"));
      strategy.descending = query(req, "descending", "0") == "1" ||
                            query(req, "descending", "") == "true";
      strategy.seed = std::stoull(query(req, "seed", "0"));
      const auto n = std::min<std::size_t>(std::stoul(query(req, "n", "1")), options_.max_batch);
      const int k = std::stoi(query(req, "context", std::to_string(options_.default_context)));
      if (k < 1 || k % 2 == 0) throw ConfigError("context must be an odd integer >= 1");

      json items = json::array();
      for (const auto& item : sampler_.next_batch(strategy, n, store_.annotated_ids())) {
        const auto sheet = sheets_.get(item.patch->sheet_id);
        const int side = sampler_.grid_side(item.patch->sheet_id);
        json j = {{"patch_id", item.patch->patch_id},
                  {"patch_png_base64", base64_encode(encode_png(sheet->image.crop(item.patch->rect)))},
                  {"context_png_base64",
                   base64_encode(encode_png(context_image(sheet->image, *item.patch, side, k)))},
                  {"context", k}};
        if (item.prediction) {
          j["prior_prediction"] = item.prediction->label_id;
          j["prior_confidence"] = item.prediction->confidence;
        }
        items.push_back(std::move(j));
      }
      reply(res, 200, {{"items", items}});
    } catch (const ConfigError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const std::invalid_argument& e) {
      reply(res, 400, {{"error", std::string("malformed query: ") + e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  });

  server_->Post("/api/label", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      LabelEvent ev;
      ev.patch_id = body.at("patch_id").get<std::string>();
      ev.label_id = body.at("label_id").get<int>();
      ev.annotator = body.at("annotator").get<std::string>();
      if (body.value("review", false)) {
        const auto* pred = sampler_.prediction(ev.patch_id);
        if (pred == nullptr) {
          reply(res, 400, {{"error", "no prediction to review for " + ev.patch_id}});
          return;
        }
        ev.prior_prediction = pred->label_id;
      }
      const auto rec = store_.record(ev);
      json out = {{"patch_id", rec.patch_id},   {"label_id", rec.label_id},
                  {"annotator", rec.annotator}, {"source", to_string(rec.source)},
                  {"seq", rec.seq}};
      if (rec.prior_prediction) out["prior_prediction"] = *rec.prior_prediction;
      reply(res, 200, out);
    } catch (const RejectedLabel& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", std::string("malformed body: ") + e.what()}});
    } catch (const std::exception& e) {
      spdlog::error("label store failed: {}", e.what());
      reply(res, 500, {{"error", e.what()}});
    }
  });

  server_->Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    const auto rows = store_.gold_standard();
    json per_label = json::object();
    for (const auto& [label, count] : store_.label_counts()) {
      per_label[std::to_string(label)] = count;
    }
    std::size_t conflicts = 0;
    std::unordered_set<std::string> patches;
    for (const auto& r : rows) {
      patches.insert(r.patch_id);
      if (r.conflict) ++conflicts;
    }
    reply(res, 200,
          {{"per_label", per_label},
           {"total", patches.size()},
           {"events", store_.event_count()},
           {"conflict_rows", conflicts},
           {"remaining", sampler_.patches().size() - patches.size()}});
  });
}

}  // namespace patchwork

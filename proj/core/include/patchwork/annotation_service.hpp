#pragma once

#include <memory>
#include <string>

#include "patchwork/annotation.hpp"
#include "patchwork/ingest.hpp"

namespace httplib {
class Server;
}

namespace patchwork {

/// HTTP/JSON front end of the annotation store:
///   GET  /api/schema
///   GET  /api/next?strategy=&n=&context=&descending=&seed=
///   POST /api/label {patch_id, label_id, annotator[, review]}
///   GET  /api/progress
class AnnotationService {
 public:
  struct Options {
    int default_context = 3;
    std::size_t max_batch = 256;
  };

  AnnotationService(AnnotationStore& store, const PatchSampler& sampler, SheetCache& sheets,
                    Options options);
  AnnotationService(AnnotationStore& store, const PatchSampler& sampler, SheetCache& sheets);
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Binds and returns the port (an ephemeral one when port == 0).
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void serve();
  void stop();

 private:
  void install_routes();

  AnnotationStore& store_;
  const PatchSampler& sampler_;
  SheetCache& sheets_;
  Options options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace patchwork

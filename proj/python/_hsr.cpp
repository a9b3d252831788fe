#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "hsr/ball.hpp"
#include "hsr/checks.hpp"
#include "hsr/config.hpp"
#include "hsr/data.hpp"
#include "hsr/errors.hpp"
#include "hsr/eval.hpp"
#include "hsr/model.hpp"
#include "hsr/trainer.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace hsr;

namespace {

struct Model {
  std::shared_ptr<const InteractionData> data;
  ModelConfig config;
  ParamStore params;

  Scorer scorer() const { return Scorer(params, data->social, config); }
};

struct TrainOutcome {
  Model model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_auc = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

TrainConfig make_config(const py::kwargs& kwargs) {
  TrainConfig cfg;
  for (const auto& [key, value] : kwargs) cfg.set(py::str(key), py::str(value));
  cfg.validate();
  return cfg;
}

py::dict report_dict(const MetricReport& r) {
  py::dict precision;
  py::dict recall;
  for (std::size_t k = 0; k < r.ks.size(); ++k) {
    precision[py::int_(r.ks[k])] = r.precision[k];
    recall[py::int_(r.ks[k])] = r.recall[k];
  }
  return py::dict("auc"_a = r.auc, "accuracy"_a = r.accuracy, "ctr_records"_a = r.ctr_records,
                  "precision"_a = precision, "recall"_a = recall, "topk_users"_a = r.topk_users);
}

std::vector<Scored> zip_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
  std::vector<Scored> out;
  out.reserve(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) out.push_back({scores[k], labels[k]});
  return out;
}

}  // namespace

PYBIND11_MODULE(_hsr, m) {
  m.doc() = "Hyperbolic social recommendation: Poincare-ball maps, training and evaluation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<CompatibilityError>(m, "CompatibilityError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def("mobius_add", [](const Vec& x, const Vec& y, double c) {
    return PoincareBall(c).mobius_add(BallPoint(x), BallPoint(y)).coords();
  }, "x"_a, "y"_a, "c"_a = 1.0);
  m.def("mobius_scalar", [](double r, const Vec& x, double c) {
    return PoincareBall(c).mobius_scalar(r, BallPoint(x)).coords();
  }, "r"_a, "x"_a, "c"_a = 1.0);
  m.def("mobius_matvec", [](const Mat& mat, const Vec& x, double c) {
    return PoincareBall(c).mobius_matvec(mat, BallPoint(x)).coords();
  }, "m"_a, "x"_a, "c"_a = 1.0);
  m.def("exp0", [](const Vec& v, double c) {
    return PoincareBall(c).exp0(TangentVec(v)).coords();
  }, "v"_a, "c"_a = 1.0);
  m.def("log0", [](const Vec& x, double c) {
    return PoincareBall(c).log0(BallPoint(x)).coords();
  }, "x"_a, "c"_a = 1.0);
  m.def("dist", [](const Vec& x, const Vec& y, double c) {
    return PoincareBall(c).dist(BallPoint(x), BallPoint(y));
  }, "x"_a, "y"_a, "c"_a = 1.0);
  m.def("project", [](const Vec& x, double c, double eps) {
    return PoincareBall(c, eps).project(x).coords();
  }, "x"_a, "c"_a = 1.0, "eps"_a = kBallEps);

  m.def("auc", [](const std::vector<double>& s, const std::vector<int>& l) {
    return auc(zip_scores(s, l));
  }, "scores"_a, "labels"_a);
  m.def("accuracy", [](const std::vector<double>& s, const std::vector<int>& l, double t) {
    return accuracy(zip_scores(s, l), t);
  }, "scores"_a, "labels"_a, "threshold"_a = 0.5);

  py::class_<TrainConfig>(m, "Config")
      .def(py::init(&make_config))
      .def("__getitem__", &TrainConfig::get)
      .def("__setitem__", [](TrainConfig& c, const std::string& k, const py::object& v) {
        c.set(k, py::str(v));
      })
      .def("validate", &TrainConfig::validate)
      .def("to_text", &TrainConfig::to_text)
      .def_static("keys", &TrainConfig::keys)
      .def("__repr__", [](const TrainConfig& c) { return "Config(\n" + c.to_text() + ")"; });

  py::class_<InteractionData, std::shared_ptr<InteractionData>>(m, "Dataset")
      .def_static("synthetic", [](int users, int items, double exponent, std::uint64_t seed) {
        SynthOptions o;
        o.num_users = users;
        o.num_items = items;
        o.exponent = exponent;
        o.seed = seed;
        return std::make_shared<InteractionData>(synth_generate(o));
      }, "users"_a = 2000, "items"_a = 3000, "exponent"_a = 2.5, "seed"_a = 1)
      .def_static("from_files", [](const std::string& ratings, const std::string& trust,
                                   double threshold, std::uint64_t seed, bool symmetrize) {
        auto d = std::make_shared<InteractionData>(
            preprocess(ingest(ratings, trust), threshold, seed, symmetrize));
        split(*d, {7.0, 1.0, 2.0}, seed);
        return d;
      }, "ratings"_a, "trust"_a, "threshold"_a = 4.0, "seed"_a = 1, "symmetrize"_a = false)
      .def_static("load", [](const std::string& dir) {
        return std::make_shared<InteractionData>(load_dataset(dir));
      }, "path"_a)
      .def("save", [](const InteractionData& d, const std::string& dir) { save_dataset(d, dir); },
           "path"_a)
      .def_readonly("num_users", &InteractionData::num_users)
      .def_readonly("num_items", &InteractionData::num_items)
      .def_property_readonly("num_relations", [](const InteractionData& d) { return d.social.num_edges(); })
      .def_property_readonly("split_sizes", &InteractionData::split_sizes)
      .def_property_readonly("positives", [](const InteractionData& d) { return d.positives; })
      .def("neighbors", [](const InteractionData& d, int u) { return d.social.neighbors(u); }, "user"_a)
      .def("records", [](const InteractionData& d, const std::string& which) {
        const Split s = parse_split(which);
        std::vector<std::tuple<int, int, int>> out;
        for (const auto& r : d.records) {
          if (r.split == s) out.emplace_back(r.user, r.item, r.label);
        }
        return out;
      }, "split"_a = "test")
      .def("degree_histogram", [](const InteractionData& d, const std::string& which) {
        if (which == "users") return degree_histogram(d, DegreeKind::kUserInteractions);
        if (which == "items") return degree_histogram(d, DegreeKind::kItemInteractions);
        if (which == "social") return degree_histogram(d, DegreeKind::kSocial);
        throw UsageError("degree kind must be users, items or social");
      }, "which"_a = "social");

  py::class_<Model>(m, "Model")
      .def_static("init", [](std::shared_ptr<InteractionData> data, const TrainConfig& cfg) {
        TrainConfig zero = cfg;
        zero.epochs = 0;
        return Model{data, cfg.model(), train(*data, zero).params};
      }, "data"_a, "config"_a)
      .def_static("load", [](const std::string& path, std::shared_ptr<InteractionData> data,
                             const std::string& geometry) {
        Checkpoint c = load_checkpoint(path, parse_geometry(geometry));
        if (c.params.num_users() != data->num_users || c.params.num_items() != data->num_items) {
          throw CompatibilityError("checkpoint does not match the dataset's user/item counts");
        }
        c.config.geometry = parse_geometry(geometry);
        return Model{data, c.config, std::move(c.params)};
      }, "path"_a, "data"_a, "geometry"_a = "hyperbolic")
      .def("save", [](const Model& md, const std::string& path) {
        save_checkpoint(path, md.params, md.config);
      }, "path"_a)
      .def("score", [](const Model& md, int u, int i) { return md.scorer().score(u, i); },
           "user"_a, "item"_a)
      .def("score_items", [](const Model& md, int u, const std::vector<int>& items) {
        return md.scorer().score_items(u, items);
      }, "user"_a, "items"_a)
      .def("user_representation", [](const Model& md, int u, int i) {
        return md.scorer().user_representation(u, i);
      }, "user"_a, "item"_a)
      .def("attention", [](const Model& md, int u, const std::vector<int>& items) {
        return attention_export(md.scorer(), u, items).weights;
      }, "user"_a, "items"_a)
      .def_property_readonly("user_embeddings", [](const Model& md) { return md.params.users(); })
      .def_property_readonly("item_embeddings", [](const Model& md) { return md.params.items(); })
      .def("evaluate", [](const Model& md, int negatives, const std::vector<int>& ks,
                          std::uint64_t seed, int repeats, int threads) {
        TopKOptions o;
        o.num_negatives = negatives;
        o.ks = ks;
        o.seed = seed;
        o.repeats = repeats;
        o.threads = threads;
        py::gil_scoped_release release;
        const MetricReport r = evaluate(md.scorer(), *md.data, o);
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      }, "negatives"_a = 500, "ks"_a = kDefaultKs, "seed"_a = 0, "repeats"_a = 1, "threads"_a = 1)
      .def("hierarchy", [](const Model& md, int groups) {
        py::list out;
        for (const auto& g : hierarchy_analysis(md.params, md.data->social, md.config, groups)) {
          out.append(py::dict("group"_a = g.group, "users"_a = g.users, "mean_dist"_a = g.mean_dist,
                              "avg_degree"_a = g.avg_degree));
        }
        return out;
      }, "groups"_a = 4);

  py::class_<TrainOutcome>(m, "TrainResult")
      .def_readonly("model", &TrainOutcome::model)
      .def_readonly("best_epoch", &TrainOutcome::best_epoch)
      .def_readonly("best_val_auc", &TrainOutcome::best_val_auc)
      .def_readonly("aborted", &TrainOutcome::aborted)
      .def_readonly("abort_reason", &TrainOutcome::abort_reason)
      .def_property_readonly("log", [](const TrainOutcome& t) {
        py::list out;
        for (const auto& r : t.log) {
          out.append(py::dict("epoch"_a = r.epoch, "train_loss"_a = r.train_loss,
                              "probe_loss"_a = r.probe_loss, "val_auc"_a = r.val_auc,
                              "val_accuracy"_a = r.val_accuracy));
        }
        return out;
      });

  m.def("train", [](std::shared_ptr<InteractionData> data, const TrainConfig& cfg) {
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = train(*data, cfg);
    }
    return TrainOutcome{Model{data, cfg.model(), std::move(r.params)}, std::move(r.log),
                        r.best_epoch, r.best_val_auc, r.aborted, r.abort_reason};
  }, "data"_a, "config"_a);

  m.def("run_checks", [](const std::string& suite, std::uint64_t seed, double tolerance) {
    CheckOptions o{seed, tolerance};
    std::vector<CheckResult> all;
    auto add = [&](std::vector<CheckResult> r) { all.insert(all.end(), r.begin(), r.end()); };
    if (suite == "all" || suite == "ball") add(run_ball_suite(o));
    if (suite == "all" || suite == "limit") add(run_limit_suite(o));
    if (suite == "all" || suite == "grad") add(run_grad_suite(o));
    if (all.empty()) throw UsageError("suite must be all, ball, limit or grad");
    py::list out;
    for (const auto& r : all) {
      out.append(py::dict("suite"_a = r.suite, "property"_a = r.property, "passed"_a = r.pass,
                          "cases"_a = r.cases, "worst"_a = r.worst, "detail"_a = r.detail));
    }
    return out;
  }, "suite"_a = "all", "seed"_a = 42, "tolerance"_a = 0.0);
}

#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "spam/backfit.hpp"

namespace spam {

//! JSON form of a fitted model. Component indices are 1-based in the
//! file. Series components carry (coefficients, offset); local-linear
//! components carry the training design column and thresholded targets.
inline nlohmann::json model_to_json(const SpamModel& model) {
  nlohmann::json j;
  j["format"] = "spam-model/1";
  j["link"] = model.link == LinkKind::Logistic ? "logistic" : "identity";
  j["intercept"] = model.intercept;
  j["lambda"] = model.lambda;
  j["converged"] = model.converged;
  j["n_iters"] = model.n_iters;
  j["objective"] = model.objective;
  j["smoother"] = {
      {"kind", model.smoother.kind == SmootherKind::LocalLinear ? "loclin" : "series"},
      {"truncation", model.smoother.truncation},
      {"bandwidth", model.smoother.bandwidth},
      {"basis", model.smoother.basis == BasisKind::Identity ? "identity" : "cosine"},
  };
  j["components"] = nlohmann::json::array();
  for (const auto& comp : model.components) {
    nlohmann::json c;
    c["j"] = comp.j + 1;
    c["active"] = comp.active;
    const auto& sc = model.column_scales.at(static_cast<std::size_t>(comp.j));
    c["scale"] = {{"min", sc.min}, {"max", sc.max}};
    if (comp.active) {
      if (model.smoother.kind == SmootherKind::OrthogonalSeries) {
        c["coefficients"] = std::vector<double>(
            comp.coefficients.data(), comp.coefficients.data() + comp.coefficients.size());
      } else {
        c["training_x"] = std::vector<double>(
            comp.training_x.data(), comp.training_x.data() + comp.training_x.size());
        c["training_targets"] =
            std::vector<double>(comp.training_targets.data(),
                                comp.training_targets.data() + comp.training_targets.size());
      }
      c["offset"] = comp.offset;
    }
    j["components"].push_back(std::move(c));
  }
  return j;
}

inline SpamModel model_from_json(const nlohmann::json& j) {
  SpamModel model;
  if (j.value("format", "") != "spam-model/1") {
    throw std::invalid_argument("model json: unknown or missing format tag");
  }
  model.link = j.at("link").get<std::string>() == "logistic" ? LinkKind::Logistic
                                                             : LinkKind::Identity;
  model.intercept = j.at("intercept").get<double>();
  model.lambda = j.at("lambda").get<double>();
  model.converged = j.at("converged").get<bool>();
  model.n_iters = j.at("n_iters").get<int>();
  model.objective = j.value("objective", std::numeric_limits<double>::quiet_NaN());
  const auto& sm = j.at("smoother");
  model.smoother.kind = sm.at("kind").get<std::string>() == "loclin"
                            ? SmootherKind::LocalLinear
                            : SmootherKind::OrthogonalSeries;
  model.smoother.truncation = sm.at("truncation").get<int>();
  model.smoother.bandwidth = sm.at("bandwidth").get<double>();
  model.smoother.basis = sm.value("basis", "cosine") == "identity" ? BasisKind::Identity
                                                                   : BasisKind::Cosine;
  for (const auto& c : j.at("components")) {
    ComponentFunction comp;
    comp.j = c.at("j").get<int>() - 1;
    comp.active = c.at("active").get<bool>();
    ColumnScale sc;
    sc.min = c.at("scale").at("min").get<double>();
    sc.max = c.at("scale").at("max").get<double>();
    model.column_scales.push_back(sc);
    if (comp.active) {
      comp.offset = c.value("offset", 0.0);
      if (c.contains("coefficients")) {
        const auto v = c.at("coefficients").get<std::vector<double>>();
        comp.coefficients = Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                              static_cast<Eigen::Index>(v.size()));
      }
      if (c.contains("training_x")) {
        const auto x = c.at("training_x").get<std::vector<double>>();
        const auto t = c.at("training_targets").get<std::vector<double>>();
        comp.training_x = Eigen::Map<const Eigen::VectorXd>(x.data(),
                                                            static_cast<Eigen::Index>(x.size()));
        comp.training_targets = Eigen::Map<const Eigen::VectorXd>(
            t.data(), static_cast<Eigen::Index>(t.size()));
      }
    }
    model.components.push_back(std::move(comp));
  }
  return model;
}

}  // namespace spam

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "ddfh/density/gmm.hpp"
#include "ddfh/error.hpp"

namespace ddfh {

/// Audit dump: weights, means, covariances (row-major), reg_covar, seed.
template <int Dim>
nlohmann::json gmm_to_json(const GaussianMixture<Dim>& model) {
  nlohmann::json j;
  j["dimension"] = Dim;
  j["weights"] = model.weights();
  auto& means = j["means"] = nlohmann::json::array();
  for (const auto& m : model.means()) means.push_back(std::vector<double>(m.data(), m.data() + Dim));
  auto& covs = j["covariances"] = nlohmann::json::array();
  for (const auto& c : model.covariances()) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < Dim; ++r) {
      std::vector<double> row(Dim);
      for (int col = 0; col < Dim; ++col) row[static_cast<std::size_t>(col)] = c(r, col);
      rows.push_back(row);
    }
    covs.push_back(rows);
  }
  j["reg_covar"] = model.reg_covar();
  j["fitted_on"] = model.fitted_on();
  j["seed"] = model.seed();
  return j;
}

template <int Dim>
GaussianMixture<Dim> gmm_from_json(const nlohmann::json& j) {
  try {
    if (j.at("dimension").get<int>() != Dim) throw DataError("mixture dimension mismatch");
    auto weights = j.at("weights").get<std::vector<double>>();
    std::vector<Point<Dim>> means;
    for (const auto& m : j.at("means")) {
      const auto v = m.get<std::vector<double>>();
      if (v.size() != static_cast<std::size_t>(Dim)) throw DataError("mean has wrong dimension");
      means.emplace_back(Eigen::Map<const Point<Dim>>(v.data()));
    }
    std::vector<Covariance<Dim>> covs;
    for (const auto& c : j.at("covariances")) {
      Covariance<Dim> m;
      if (c.size() != static_cast<std::size_t>(Dim)) throw DataError("covariance has wrong dimension");
      for (int r = 0; r < Dim; ++r) {
        const auto row = c.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(Dim)) throw DataError("covariance has wrong dimension");
        for (int col = 0; col < Dim; ++col) m(r, col) = row[static_cast<std::size_t>(col)];
      }
      covs.push_back(m);
    }
    return GaussianMixture<Dim>(std::move(weights), std::move(means), std::move(covs), j.at("reg_covar").get<double>(),
                                j.at("fitted_on").get<std::size_t>(), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed mixture JSON: ") + e.what());
  } catch (const InvariantError& e) {
    throw DataError(std::string("invalid mixture parameters: ") + e.what());
  }
}

}  // namespace ddfh

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facov/model.hpp"
#include "facov/simlab.hpp"

namespace facov::cli {

/// Knobs shared by every subcommand.
struct CommonOptions {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = all available cores
  std::string out_dir = ".";
  SolverConfig solver;
  Eigen::Index r = 2;
  double lambda = -1.0;              // fixed penalty level; < 0 means "use CV"
  std::vector<double> lambda_grid;   // explicit CV grid; empty means default
  int k_folds = 5;
};

struct SimulateOptions {
  CommonOptions common;
  SimModel model = SimModel::banded;
  Eigen::Index n = 50;
  Eigen::Index p = 50;
  int replications = 100;
  std::vector<Method> methods{Method::emapg, Method::mmem, Method::hml, Method::pc};
};

struct EstimateOptions {
  CommonOptions common;
  std::string input;
  bool has_header = false;
};

struct CvOptions {
  CommonOptions common;
  std::string input;
  bool has_header = false;
};

struct ForecastOptions {
  CommonOptions common;
  bool synthetic = false;
  Eigen::Index p = 50;
  Eigen::Index n = 50;  // window length
  Eigen::Index m = 50;  // rolling origins
  int horizon = 1;
  int lags = 0;
  bool per_origin_cv = false;
  std::string input_y;
  std::string input_x;
  bool has_header = false;
  std::vector<Method> methods{Method::emapg, Method::mmem, Method::hml, Method::pc};
};

int cmd_simulate(const SimulateOptions& opt);
int cmd_estimate(const EstimateOptions& opt);
int cmd_cv(const CvOptions& opt);
int cmd_forecast(const ForecastOptions& opt);

Method parse_method(const std::string& name);

}  // namespace facov::cli

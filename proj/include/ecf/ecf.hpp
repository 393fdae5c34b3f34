#pragma once

// Everything in one include.

#include "ecf/conservation.hpp"
#include "ecf/dataset.hpp"
#include "ecf/error.hpp"
#include "ecf/fft.hpp"
#include "ecf/grid.hpp"
#include "ecf/io/binary.hpp"
#include "ecf/io/dataset_file.hpp"
#include "ecf/metrics.hpp"
#include "ecf/nn/adamw.hpp"
#include "ecf/nn/checkpoint.hpp"
#include "ecf/nn/loss.hpp"
#include "ecf/nn/model.hpp"
#include "ecf/parallel.hpp"
#include "ecf/pde/allen_cahn.hpp"
#include "ecf/pde/exact.hpp"
#include "ecf/pde/flux_balance.hpp"
#include "ecf/pde/initial_conditions.hpp"
#include "ecf/pde/problem.hpp"
#include "ecf/pde/shallow_water.hpp"
#include "ecf/report.hpp"
#include "ecf/training.hpp"
#include "ecf/verify.hpp"

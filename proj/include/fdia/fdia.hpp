#pragma once

#include "fdia/errors.hpp"
#include "fdia/matpower_io.hpp"
#include "fdia/chi2.hpp"
#include "fdia/dc_grid.hpp"
#include "fdia/dataset.hpp"
#include "fdia/attackgen.hpp"
#include "fdia/learners/perceptron.hpp"
#include "fdia/learners/knn.hpp"
#include "fdia/learners/svm.hpp"
#include "fdia/learners/slr.hpp"
#include "fdia/learners/s3vm.hpp"
#include "fdia/learners/adaboost.hpp"
#include "fdia/learners/mkl.hpp"
#include "fdia/learners/online.hpp"
#include "fdia/model.hpp"
#include "fdia/bench/metrics.hpp"
#include "fdia/bench/sweep.hpp"
#include "fdia/bench/export.hpp"

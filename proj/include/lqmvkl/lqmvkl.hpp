#pragma once

#include "lqmvkl/qsim.hpp"
#include "lqmvkl/kernel.hpp"
#include "lqmvkl/alignment.hpp"
#include "lqmvkl/trainer.hpp"
#include "lqmvkl/svm.hpp"
#include "lqmvkl/dataset.hpp"
#include "lqmvkl/experiment.hpp"

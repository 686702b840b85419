#pragma once

#include "ganfair/adam.hpp"
#include "ganfair/config.hpp"
#include "ganfair/dataset.hpp"
#include "ganfair/ensemble.hpp"
#include "ganfair/experiment.hpp"
#include "ganfair/fairness.hpp"
#include "ganfair/gan.hpp"
#include "ganfair/gradcheck.hpp"
#include "ganfair/gradsuite.hpp"
#include "ganfair/mlp.hpp"
#include "ganfair/random.hpp"
#include "ganfair/svg.hpp"
#include "ganfair/tensor.hpp"

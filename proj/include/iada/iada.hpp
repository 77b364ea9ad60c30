#pragma once

#include "iada/array.hpp"
#include "iada/autodiff.hpp"
#include "iada/config.hpp"
#include "iada/csv.hpp"
#include "iada/domains.hpp"
#include "iada/errors.hpp"
#include "iada/metrics.hpp"
#include "iada/model.hpp"
#include "iada/objectives.hpp"
#include "iada/rng.hpp"
#include "iada/sampling.hpp"
#include "iada/theory.hpp"
#include "iada/trainer.hpp"

#pragma once

#include "opl/common.hpp"
#include "opl/cross_fit.hpp"
#include "opl/dataset.hpp"
#include "opl/diagnostics.hpp"
#include "opl/errors.hpp"
#include "opl/online.hpp"
#include "opl/policy.hpp"
#include "opl/propensity.hpp"
#include "opl/ridge.hpp"
#include "opl/risk.hpp"
#include "opl/synthetic.hpp"
#include "opl/value.hpp"

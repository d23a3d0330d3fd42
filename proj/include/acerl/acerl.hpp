#pragma once

#include <acerl/error.hpp>
#include <acerl/core.hpp>
#include <acerl/linalg.hpp>
#include <acerl/masking.hpp>
#include <acerl/init.hpp>
#include <acerl/estimator.hpp>
#include <acerl/spca.hpp>
#include <acerl/downstream.hpp>
#include <acerl/simgen.hpp>
#include <acerl/metrics.hpp>
#include <acerl/io.hpp>
#include <acerl/harness.hpp>

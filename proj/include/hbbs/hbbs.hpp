#pragma once

#include "hbbs/core.hpp"
#include "hbbs/rng.hpp"
#include "hbbs/environments.hpp"
#include "hbbs/surrogate.hpp"
#include "hbbs/kmeans.hpp"
#include "hbbs/bandit.hpp"
#include "hbbs/gp.hpp"
#include "hbbs/agents.hpp"
#include "hbbs/harness.hpp"

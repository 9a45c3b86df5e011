#pragma once

#include "fj/config.hpp"
#include "fj/deps.hpp"
#include "fj/error.hpp"
#include "fj/loop.hpp"
#include "fj/parallel.hpp"
#include "fj/policies.hpp"
#include "fj/runtime.hpp"
#include "fj/sync.hpp"
#include "fj/task.hpp"
#include "fj/tool.hpp"

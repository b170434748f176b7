#!/usr/bin/env python3
"""Solve an LP-format model with HiGHS and write a ddsp solution file.

Usage: highs_solve.py MODEL.lp SOLUTION.sol TIME_LIMIT

Meant as the external solver command:
  --solver external --solver-cmd "python3 tools/highs_solve.py {in} {out} {tl}"
"""

import sys

import highspy


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    model_path, solution_path, time_limit = sys.argv[1], sys.argv[2], float(sys.argv[3])

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", time_limit)
    h.setOptionValue("threads", 1)
    if h.readModel(model_path) != highspy.HighsStatus.kOk:
        print(f"cannot read {model_path}", file=sys.stderr)
        return 1
    h.run()

    status = h.getModelStatus()
    info = h.getInfo()
    has_solution = info.primal_solution_status == 2  # feasible
    with open(solution_path, "w") as out:
        if status == highspy.HighsModelStatus.kOptimal:
            out.write("status optimal\n")
        elif status == highspy.HighsModelStatus.kInfeasible:
            out.write("status infeasible\n")
            return 0
        elif has_solution:
            out.write("status feasible (time limit)\n")
        else:
            print(f"no solution: {h.modelStatusToString(status)}", file=sys.stderr)
            return 1
        names = h.getLp().col_names_
        values = h.getSolution().col_value
        for name, value in zip(names, values):
            out.write(f"{name} {round(value)}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

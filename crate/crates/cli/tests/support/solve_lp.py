"""Solve an LP file with HiGHS and print `name value` lines.

The first line is `objective <value>`; exit status 2 means infeasible.
"""
import sys

import highspy


def solve(lp_path, presolve):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.setOptionValue("presolve", presolve)
    h.readModel(lp_path)
    h.run()
    return h


def main():
    lp_path = sys.argv[1]
    h = solve(lp_path, "on")
    if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
        # presolve has been seen to declare feasible models infeasible
        h = solve(lp_path, "off")
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        print(f"status {h.modelStatusToString(status)}")
        sys.exit(2)
    print(f"objective {h.getInfo().objective_function_value}")
    values = h.getSolution().col_value
    lp = h.getLp()
    for name, value in zip(lp.col_names_, values):
        print(f"{name} {value:.9f}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python
import argparse
import os
import subprocess
import sys

YAPF_STYLE = "{based_on_style: pep8, indent_width: 2, column_limit: 200, split_before_logical_operator: true}"


def python_files(target):
  if os.path.isfile(target):
    return [target]
  return sorted(os.path.join(root, f) for root, _, files in os.walk(target) for f in files if f.endswith(".py"))


def run_yapf(files, check: bool) -> int:
  unformatted = 0
  for file in files:
    command = ["yapf", "--style", YAPF_STYLE, "--diff" if check else "-i", file]
    result = subprocess.run(command, capture_output=True, text=True)
    if check and result.returncode == 1:
      unformatted += 1
      print(f"Would reformat: {file}")
    elif result.returncode not in (0, 1):
      print(f"Error formatting {file}: {result.stderr}")
      unformatted += 1
    elif not check:
      print(f"Formatted: {file}")
  return unformatted


def main():
  parser = argparse.ArgumentParser(description="Format opensys sources with yapf")
  parser.add_argument("targets", nargs="*", default=["opensys"], help="Files or directories (default: opensys)")
  parser.add_argument("--check", action="store_true", help="Report files that need formatting without touching them")
  args = parser.parse_args()

  files = [f for target in args.targets for f in python_files(target)]
  failures = run_yapf(files, args.check)
  print(f"{len(files)} files checked, {failures} need attention." if args.check else "Formatting completed.")
  sys.exit(1 if failures else 0)


if __name__ == "__main__":
  main()

from setuptools import find_packages, setup

install_requires = [
  "numpy==2.0.0",
  "pydantic==2.9.2",
  "rich==13.7.1",
  "tqdm==4.66.4",
]

extras_require = {
  "formatting": ["yapf==0.40.2",],
  "testing": [
    "pytest==8.3.3",
    "hypothesis==6.112.1",
  ],
}

setup(
  name="opensys",
  version="0.1.0",
  packages=find_packages(exclude=["examples", "examples.*"]),
  install_requires=install_requires,
  extras_require=extras_require,
  package_data={"opensys": ["presets/*.json"], "opensys.markov": ["test_data/*"], "opensys.dilation": ["test_data/*"], "opensys.sde": ["test_data/*"]},
  entry_points={"console_scripts": ["opensys = opensys.main:run"]},
)

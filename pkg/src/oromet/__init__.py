"""Acoustic and orofacial speech metrics, cohort statistics, and predictive models.

The package is organised in three layers:

* signal layer -- ``audio_io``, ``voice``, ``timing``, ``ddk``, ``facial``
  turn recordings and landmark tracks into named metrics;
* analysis layer -- ``stats`` and ``models`` aggregate metrics over a cohort
  and run group contrasts, cross-validated classification, and the lasso
  regression path;
* orchestration -- ``pipeline`` binds everything behind file-based inputs
  and outputs, exposed through a FastAPI service (``oromet.service``) and a
  thin CLI client (``oromet.cli``).
"""

__version__ = "0.1.0"

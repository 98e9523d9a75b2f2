"""
Extended deployment descriptors: a Kubernetes Deployment whose container carries
`probes` and probabilistic `timingRequirements` over them.

Two shapes are accepted. The compact one nests requirement entries (those with
`limits`) directly in the `probes` list, each naming the probe it constrains.
The canonical one, written by serialize_descriptor, keeps `probes` as plain names
and lists `timingRequirements` beside them on the container.
"""

import logging
from typing import Any, Dict, List

import yaml
from pydantic import ValidationError

from exceptions import DescriptorError
from models import ResourceProfile, ServiceSpec, TimingRequirement

logger = logging.getLogger(__name__)

KNOWN_CONTAINER_KEYS = {'name', 'image', 'probes', 'timingRequirements', 'profile', 'measuredWorkload'}


def _find_container(doc: Dict[str, Any]) -> Dict[str, Any]:
    """First container under spec.template.spec, spec.spec or spec"""
    spec = doc.get('spec') or {}
    if not isinstance(spec, dict):
        raise DescriptorError("'spec' must be a mapping")
    candidates = [
        (spec.get('template') or {}).get('spec') if isinstance(spec.get('template'), dict) else None,
        spec.get('spec'),
        spec,
    ]
    for candidate in candidates:
        if isinstance(candidate, dict) and candidate.get('containers'):
            containers = candidate['containers']
            if not isinstance(containers, list) or not isinstance(containers[0], dict):
                raise DescriptorError("'containers' must be a list of mappings")
            if len(containers) > 1:
                logger.warning(f"⚠️ [Descriptor] {len(containers)} containers declared, only the first is evaluated")
            return containers[0]
    raise DescriptorError('descriptor declares no containers')


def _requirements_from_entry(entry: Dict[str, Any]) -> List[TimingRequirement]:
    probe = entry.get('probe')
    if not probe:
        raise DescriptorError(f"timing requirement '{entry.get('name')}' does not name its probe")
    limits = entry.get('limits') or []
    if not isinstance(limits, list):
        raise DescriptorError(f"limits of '{entry.get('name')}' must be a list")
    requirements = []
    for limit in limits:
        if not isinstance(limit, dict) or 'probability' not in limit or 'time' not in limit:
            raise DescriptorError(f"limit {limit!r} needs 'probability' and 'time'")
        try:
            requirements.append(TimingRequirement(
                probe_name=str(probe), probability=limit['probability'],
                time_ms=limit['time'], name=entry.get('name'),
            ))
        except ValidationError as e:
            raise DescriptorError(f"invalid limit {limit!r}: {e.errors()[0]['msg']}") from e
    return requirements


def parse_descriptor(text: str) -> ServiceSpec:
    """Parse a descriptor document into a ServiceSpec"""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise DescriptorError(f"malformed descriptor: {e}") from e
    if not isinstance(doc, dict):
        raise DescriptorError('descriptor must be a mapping')

    name = (doc.get('metadata') or {}).get('name')
    if not name:
        raise DescriptorError('descriptor has no metadata.name')
    container = _find_container(doc)

    probes: List[str] = []
    requirements: List[TimingRequirement] = []
    probe_entries = container.get('probes')
    if probe_entries is not None and not isinstance(probe_entries, list):
        raise DescriptorError("'probes' must be a list")

    for entry in probe_entries or []:
        if isinstance(entry, str):
            entry = {'name': entry}
        if not isinstance(entry, dict) or not entry.get('name'):
            raise DescriptorError(f"probe entry {entry!r} has no name")
        if 'limits' in entry:
            found = _requirements_from_entry(entry)
            requirements.extend(found)
            if entry['probe'] not in probes:
                probes.append(str(entry['probe']))
        elif entry['name'] not in probes:
            probes.append(str(entry['name']))

    container_requirements = container.get('timingRequirements') or []
    if container_requirements and probe_entries is None:
        raise DescriptorError('timing requirements given but the container declares no probes')
    for entry in container_requirements:
        if not isinstance(entry, dict):
            raise DescriptorError(f"timing requirement {entry!r} must be a mapping")
        requirements.extend(_requirements_from_entry(entry))

    profile = container.get('profile') or {}
    extra = {k: v for k, v in container.items() if k not in KNOWN_CONTAINER_KEYS}
    try:
        spec = ServiceSpec(
            name=str(name),
            container=str(container.get('name') or ''),
            image=str(container.get('image') or ''),
            probes=probes,
            requirements=requirements,
            profile=ResourceProfile.model_validate(profile),
            measured_workload=container.get('measuredWorkload'),
            extra=extra,
        )
    except ValidationError as e:
        raise DescriptorError(f"invalid descriptor '{name}': {e.errors()[0]['msg']}") from e

    logger.info(f"📄 [Descriptor] Parsed '{spec.name}': {len(spec.probes)} probes, {len(spec.requirements)} limits")
    return spec


def serialize_descriptor(spec: ServiceSpec) -> str:
    """Canonical descriptor text; parse_descriptor(serialize_descriptor(s)) == s"""
    grouped: Dict[tuple, Dict[str, Any]] = {}
    for req in spec.requirements:
        key = (req.name, req.probe_name)
        entry = grouped.get(key)
        if entry is None:
            entry = grouped[key] = {'name': req.name} if req.name is not None else {}
            entry.update(probe=req.probe_name, limits=[])
        entry['limits'].append({'probability': req.probability, 'time': req.time_ms})

    container: Dict[str, Any] = {
        'name': spec.container,
        'image': spec.image,
        'probes': [{'name': probe} for probe in spec.probes],
    }
    if grouped:
        container['timingRequirements'] = list(grouped.values())
    container['profile'] = spec.profile.model_dump()
    if spec.measured_workload is not None:
        container['measuredWorkload'] = spec.measured_workload
    container.update(spec.extra)

    doc = {
        'kind': 'Deployment',
        'metadata': {'name': spec.name},
        'spec': {'template': {'spec': {'containers': [container]}}},
    }
    return yaml.safe_dump(doc, sort_keys=False)


def load_descriptor(path) -> ServiceSpec:
    with open(path, encoding='utf-8') as fh:
        return parse_descriptor(fh.read())


def requirement_levels(spec: ServiceSpec) -> List[float]:
    """Distinct percentile levels the service's requirements ask for, ascending"""
    return sorted({req.probability for req in spec.requirements})


"""Post-editing effort log: XML event stream plus effort aggregation.

One document records one editing session: keystrokes, mouse actions,
focus and confirm events, grouped per segment with millisecond UTC
timestamps. The schema is deliberately minimal:

    <pelog version="1">
      <segment id="s1">
        <event kind="focus" t="1000"/>
        <event kind="keystroke" t="1200" key="a" action="insert"/>
        <event kind="confirm" t="9000"/>
      </segment>
    </pelog>

``parse_log(write_log(events)) == events`` for any valid stream in
canonical order (each segment's events contiguous, segments ordered by
first appearance). Streams interleaved across segments round-trip to
their canonical form: the document stores per-segment order, which is
all the ordering the events themselves carry. Unknown elements and
attributes parse with a warning so newer writers stay readable.
"""

from __future__ import annotations

import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import LogFormatError

LOG_VERSION = "1"
EVENT_KINDS = ("keystroke", "mouse", "focus", "confirm")
KEYSTROKE_ACTIONS = ("insert", "delete", "paste")


@dataclass(frozen=True)
class LogEvent:
    """One user action inside a segment.

    ``t`` is epoch milliseconds, UTC. Keystrokes carry the key identity and
    whether it inserted or deleted text; mouse events carry an action name.
    """

    kind: str
    t: int
    segment_id: str
    key: str | None = None
    action: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if not isinstance(self.t, int) or self.t < 0:
            raise ValueError(f"timestamp must be a non-negative integer, got {self.t!r}")
        if not self.segment_id:
            raise ValueError("segment_id must be non-empty")
        if self.kind == "keystroke":
            if not self.key or self.action not in KEYSTROKE_ACTIONS:
                raise ValueError("keystroke events need a key and an action (insert/delete/paste)")
        elif self.kind == "mouse":
            if not self.action:
                raise ValueError("mouse events need an action name")


def write_log(events: list[LogEvent]) -> str:
    """Serialize events to an XML document string.

    Segments appear in order of their first event; within a segment the
    event order is preserved and timestamps must be non-decreasing.
    """
    by_segment: dict[str, list[LogEvent]] = {}
    for event in events:
        if not isinstance(event, LogEvent):
            raise TypeError(f"expected LogEvent, got {type(event).__name__}")
        bucket = by_segment.setdefault(event.segment_id, [])
        if bucket and event.t < bucket[-1].t:
            raise ValueError(f"out-of-order timestamps in segment {event.segment_id!r}")
        bucket.append(event)

    root = ET.Element("pelog", version=LOG_VERSION)
    for segment_id, bucket in by_segment.items():
        seg = ET.SubElement(root, "segment", id=segment_id)
        for event in bucket:
            attrs = {"kind": event.kind, "t": str(event.t)}
            if event.key is not None:
                attrs["key"] = event.key
            if event.action is not None:
                attrs["action"] = event.action
            ET.SubElement(seg, "event", attrs)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=False)


def write_log_file(events: list[LogEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_log(events) + "\n")


def parse_log(document: str) -> list[LogEvent]:
    """Parse an XML document string back into the event stream."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        line, column = exc.position
        raise LogFormatError(f"malformed XML at line {line}, column {column}: {exc.msg}") from exc
    if root.tag != "pelog":
        raise LogFormatError(f"not an effort log: root element {root.tag!r}")
    version = root.get("version")
    if version != LOG_VERSION:
        raise LogFormatError(f"unsupported log version {version!r} (supported: {LOG_VERSION})")

    events: list[LogEvent] = []
    for child in root:
        if child.tag != "segment":
            warnings.warn(f"ignoring unknown element <{child.tag}>", stacklevel=2)
            continue
        segment_id = child.get("id")
        if segment_id is None:
            raise LogFormatError("segment element without id attribute")
        for node in child:
            if node.tag != "event":
                warnings.warn(f"ignoring unknown element <{node.tag}>", stacklevel=2)
                continue
            known = {"kind", "t", "key", "action"}
            unknown = set(node.keys()) - known
            if unknown:
                warnings.warn(f"ignoring unknown event attributes {sorted(unknown)}", stacklevel=2)
            kind = node.get("kind")
            if kind not in EVENT_KINDS:
                warnings.warn(f"ignoring event of unknown kind {kind!r}", stacklevel=2)
                continue
            t = node.get("t")
            try:
                timestamp = int(t)
            except (TypeError, ValueError):
                raise LogFormatError(f"event in segment {segment_id!r} has bad timestamp {t!r}")
            try:
                events.append(
                    LogEvent(
                        kind=kind,
                        t=timestamp,
                        segment_id=segment_id,
                        key=node.get("key"),
                        action=node.get("action"),
                    )
                )
            except ValueError as exc:
                raise LogFormatError(f"invalid event in segment {segment_id!r}: {exc}") from exc
    return events


def parse_log_file(path) -> list[LogEvent]:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh.read())


@dataclass(frozen=True)
class SegmentEffort:
    """Aggregated effort for one segment."""

    segment_id: str
    keystroke_count: int
    mouse_count: int
    editing_seconds: float
    source_char_count: int
    final_target_char_count: int
    #: False when focus or confirm was missing and editing_seconds fell back to 0.
    time_complete: bool = True


@dataclass(frozen=True)
class EffortReport:
    """Per-segment efforts plus exact totals and derived rates."""

    segments: list[SegmentEffort]
    total_keystrokes: int
    total_mouse: int
    total_editing_seconds: float
    total_source_chars: int
    total_target_chars: int
    mean_seconds_per_segment: float
    keystrokes_per_target_char: float


def compute_effort(events: list[LogEvent], segments: dict[str, tuple[str, str]]) -> EffortReport:
    """Aggregate an event stream into per-segment effort numbers.

    ``segments`` maps segment id to ``(source_text, final_target_text)``
    and defines the full segment universe; segments without events report
    zero counts. ``editing_seconds`` spans first focus to last confirm and
    falls back to 0 (flagged) when either endpoint is missing.
    """
    by_segment: dict[str, list[LogEvent]] = {sid: [] for sid in segments}
    for event in events:
        if event.segment_id not in segments:
            raise ValueError(f"unknown segment id {event.segment_id!r}")
        by_segment[event.segment_id].append(event)

    rows: list[SegmentEffort] = []
    for segment_id, bucket in by_segment.items():
        source, target = segments[segment_id]
        first_focus = next((e.t for e in bucket if e.kind == "focus"), None)
        last_confirm = next((e.t for e in reversed(bucket) if e.kind == "confirm"), None)
        complete = first_focus is not None and last_confirm is not None
        seconds = (last_confirm - first_focus) / 1000.0 if complete else 0.0
        rows.append(
            SegmentEffort(
                segment_id=segment_id,
                keystroke_count=sum(e.kind == "keystroke" for e in bucket),
                mouse_count=sum(e.kind == "mouse" for e in bucket),
                editing_seconds=max(0.0, seconds),
                source_char_count=len(source),
                final_target_char_count=len(target),
                time_complete=complete,
            )
        )

    total_target = sum(r.final_target_char_count for r in rows)
    total_keys = sum(r.keystroke_count for r in rows)
    total_seconds = sum(r.editing_seconds for r in rows)
    return EffortReport(
        segments=rows,
        total_keystrokes=total_keys,
        total_mouse=sum(r.mouse_count for r in rows),
        total_editing_seconds=total_seconds,
        total_source_chars=sum(r.source_char_count for r in rows),
        total_target_chars=total_target,
        mean_seconds_per_segment=total_seconds / len(rows) if rows else 0.0,
        keystrokes_per_target_char=total_keys / total_target if total_target else 0.0,
    )


def format_effort_table(report: EffortReport) -> str:
    """Tab-separated effort table: header, one row per segment, totals row."""
    lines = ["segment\tkeystrokes\tmouse\tseconds\tsrc_chars\ttgt_chars"]
    for row in report.segments:
        lines.append(
            f"{row.segment_id}\t{row.keystroke_count}\t{row.mouse_count}"
            f"\t{row.editing_seconds:.3f}\t{row.source_char_count}\t{row.final_target_char_count}"
        )
    lines.append(
        f"TOTAL\t{report.total_keystrokes}\t{report.total_mouse}"
        f"\t{report.total_editing_seconds:.3f}\t{report.total_source_chars}\t{report.total_target_chars}"
    )
    return "\n".join(lines)

/** DOM wiring for the post-editing workbench. */

import { SegmentStore } from './store.js';
import { validateSettings } from './types.js';
import type { SegmentRow, WorkbenchSettings } from './types.js';

let store: SegmentStore | null = null;

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function showBanner(message: string | null): void {
  const banner = byId<HTMLDivElement>('banner');
  banner.textContent = message ?? '';
  banner.style.display = message ? 'block' : 'none';
}

function renderRows(): void {
  if (!store) return;
  const tbody = byId<HTMLTableSectionElement>('grid-body');
  tbody.innerHTML = '';
  for (const row of store.rows) {
    const tr = document.createElement('tr');
    tr.dataset.status = row.status;

    const idCell = document.createElement('td');
    idCell.textContent = row.id;
    const srcCell = document.createElement('td');
    srcCell.textContent = row.source;

    const tgtCell = document.createElement('td');
    tgtCell.className = 'target';
    const area = document.createElement('textarea');
    area.value = row.target;
    area.rows = 2;
    area.disabled = row.status === 'confirmed';
    wireTargetCell(area, row);
    tgtCell.appendChild(area);

    const statusCell = document.createElement('td');
    statusCell.textContent =
      row.status + (row.acknowledgedCounter !== null ? ` (#${row.acknowledgedCounter})` : '');
    if (row.error) statusCell.textContent += ` ! ${row.error}`;

    const actionCell = document.createElement('td');
    const confirmBtn = document.createElement('button');
    confirmBtn.textContent = row.error ? 'retry' : 'confirm';
    confirmBtn.disabled = row.status === 'untranslated' || row.status === 'confirmed';
    confirmBtn.addEventListener('click', () => {
      store!
        .confirmSegment(row.id)
        .then(() => renderRows())
        .catch(() => renderRows());
    });
    actionCell.appendChild(confirmBtn);

    tr.append(idCell, srcCell, tgtCell, statusCell, actionCell);
    tbody.appendChild(tr);
  }
}

function wireTargetCell(area: HTMLTextAreaElement, row: SegmentRow): void {
  area.addEventListener('click', () => {
    if (row.status === 'untranslated') {
      store!
        .fetchTranslation(row.id)
        .then(() => {
          showBanner(store!.rows.some((r) => r.error) ? store!.lastError : null);
          renderRows();
        })
        .catch(() => renderRows());
    } else {
      store!.logger.recordMouse(row.id, 'click');
    }
  });
  area.addEventListener('beforeinput', (event: InputEvent) => {
    if (row.status === 'confirmed' || row.status === 'untranslated') return;
    void event;
  });
  area.addEventListener('input', (event: Event) => {
    const ie = event as InputEvent;
    if (row.status === 'untranslated' || row.status === 'confirmed') return;
    const kind =
      ie.inputType === 'insertFromPaste'
        ? 'paste'
        : ie.inputType?.startsWith('delete')
          ? 'delete'
          : 'insert';
    store!.edit(row.id, area.value, ie.data ?? '', kind);
  });
}

function startSession(): void {
  const settings: Partial<WorkbenchSettings> = {
    serverUrl: byId<HTMLInputElement>('server-url').value,
    username: byId<HTMLInputElement>('username').value,
    password: byId<HTMLInputElement>('password').value,
    projectId: byId<HTMLInputElement>('project-id').value,
    srcLang: byId<HTMLInputElement>('src-lang').value,
    tgtLang: byId<HTMLInputElement>('tgt-lang').value,
    useMachineTranslation: byId<HTMLInputElement>('use-mt').checked,
  };
  let valid: WorkbenchSettings;
  try {
    valid = validateSettings(settings);
  } catch (error) {
    showBanner(error instanceof Error ? error.message : String(error));
    return;
  }
  store = new SegmentStore(valid);
  const text = byId<HTMLTextAreaElement>('document-input').value;
  store.loadDocument(text);
  showBanner(null);
  byId<HTMLDivElement>('workbench').style.display = 'block';
  renderRows();
}

function exportLog(): void {
  if (!store) return;
  const xml = store.exportLog();
  const blob = new Blob([xml], { type: 'application/xml' });
  const link = document.createElement('a');
  link.href = URL.createObjectURL(blob);
  link.download = 'pelog.xml';
  link.click();
  URL.revokeObjectURL(link.href);
}

export function main(): void {
  byId<HTMLButtonElement>('start-session').addEventListener('click', startSession);
  byId<HTMLButtonElement>('export-log').addEventListener('click', exportLog);
}

if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', main);
}

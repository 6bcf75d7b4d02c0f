/** Shared workbench types and the server wire formats. */

export interface WorkbenchSettings {
  serverUrl: string;
  username: string;
  password: string; // held in memory only, never persisted or exported
  projectId: string;
  srcLang: string;
  tgtLang: string;
  useMachineTranslation: boolean;
}

export function validateSettings(s: Partial<WorkbenchSettings>): WorkbenchSettings {
  const required: (keyof WorkbenchSettings)[] = [
    'serverUrl',
    'username',
    'password',
    'projectId',
    'srcLang',
    'tgtLang',
  ];
  for (const field of required) {
    const value = s[field];
    if (value === undefined || value === null || value === '') {
      throw new Error(`settings field '${field}' is required`);
    }
  }
  return {
    serverUrl: String(s.serverUrl).replace(/\/+$/, ''),
    username: s.username!,
    password: s.password!,
    projectId: s.projectId!,
    srcLang: s.srcLang!,
    tgtLang: s.tgtLang!,
    useMachineTranslation: s.useMachineTranslation ?? true,
  };
}

export type SegmentStatus = 'untranslated' | 'machine-translated' | 'editing' | 'confirmed';

export interface SegmentRow {
  id: string;
  source: string;
  target: string;
  status: SegmentStatus;
  hypothesisId: string | null;
  /** bumps on every re-edit after a failed or stale confirm */
  revision: number;
  /** updates_applied acknowledged by the server for this row's confirm */
  acknowledgedCounter: number | null;
  error: string | null;
}

/** Legal status moves; editing may repeat. */
const TRANSITIONS: Record<SegmentStatus, SegmentStatus[]> = {
  untranslated: ['machine-translated'],
  'machine-translated': ['editing', 'confirmed'],
  editing: ['editing', 'confirmed'],
  confirmed: [],
};

export function canTransition(from: SegmentStatus, to: SegmentStatus): boolean {
  return TRANSITIONS[from].includes(to);
}

// -- wire formats -------------------------------------------------------------

export interface TranslateResponseSegment {
  id: string | number;
  tgt: string;
  hypothesis_id: string;
  model_updates_seen: number;
}

export interface TranslateResponse {
  segments: TranslateResponseSegment[];
}

export interface UpdateResponse {
  accepted: boolean;
  pre_loss: number;
  post_loss: number;
  updates_applied: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

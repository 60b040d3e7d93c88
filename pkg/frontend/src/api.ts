// Typed client for the advisor service. All numbers shown anywhere in
// the dashboard originate from these payloads; the UI never computes
// probabilities itself.

export interface BeliefPair {
    completion: number
    probability: number
}

export interface WhatIfEntry {
    action: number
    expected_value: number | null
    keep_previous: boolean
}

export interface SessionHistory {
    observations: number[]
    completed_flags: boolean[]
    announcements: number[]
}

export interface SessionView {
    id: string
    status: 'active' | 'completed'
    phase: 'awaiting_observation' | 'awaiting_announcement'
    clock: number
    policy: string
    config: Record<string, number>
    prev_announce: number | null
    history: SessionHistory
    belief: BeliefPair[]
    recommendation: number | null
}

export interface ObserveResponse {
    recommendation: number
    belief: BeliefPair[]
    what_if: WhatIfEntry[]
    session: SessionView
}

export interface PolicyListing {
    policies: { file: string; kind: string; config_fingerprint: string; preset: string | null }[]
    presets: Record<string, { t_min: number; t_max: number }>
}

export interface CreateSessionBody {
    policy: string
    config_name?: string
    config?: Record<string, number>
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>

export class ApiError extends Error {
    constructor(readonly status: number, detail: string) {
        super(detail)
        this.name = 'ApiError'
    }
}

export class ApiClient {
    constructor(
        private readonly base: string = '',
        private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchImpl(this.base + path, init)
        let body: unknown = null
        try {
            body = await response.json()
        } catch {
            // fall through with a null body
        }
        if (!response.ok) {
            const detail =
                body && typeof body === 'object' && 'detail' in body
                    ? String((body as { detail: unknown }).detail)
                    : `request failed with status ${response.status}`
            throw new ApiError(response.status, detail)
        }
        return body as T
    }

    private post<T>(path: string, payload: unknown): Promise<T> {
        return this.request<T>(path, {
            method: 'POST',
            headers: { 'Content-Type': 'application/json' },
            body: JSON.stringify(payload),
        })
    }

    createSession(body: CreateSessionBody): Promise<{ id: string }> {
        return this.post('/sessions', body)
    }

    getSession(id: string): Promise<SessionView> {
        return this.request(`/sessions/${id}`)
    }

    observe(id: string, estimate: number, completed: boolean): Promise<ObserveResponse> {
        return this.post(`/sessions/${id}/observe`, { estimate, completed })
    }

    announce(id: string, announce: number): Promise<SessionView> {
        return this.post(`/sessions/${id}/announce`, { announce })
    }

    policies(): Promise<PolicyListing> {
        return this.request('/policies')
    }
}

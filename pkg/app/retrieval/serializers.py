from rest_framework import serializers


class TripletRecordSerializer(serializers.Serializer):
    """Serializer for one JSON Lines triplet record."""
    id = serializers.CharField()
    ref_tokens = serializers.ListField(
        child=serializers.IntegerField(min_value=0),
        allow_empty=False,
    )
    text_tokens = serializers.ListField(
        child=serializers.IntegerField(min_value=0),
        allow_empty=False,
    )
    target_tokens = serializers.ListField(
        child=serializers.IntegerField(min_value=0),
        allow_empty=False,
    )
    subset_ids = serializers.ListField(
        child=serializers.CharField(),
        required=False,
        allow_null=True,
        allow_empty=False,
    )

    def validate(self, attrs):
        """Check the subset holds the record's own target and freeze lists."""
        subset = attrs.get('subset_ids')
        if subset is not None and attrs['id'] not in subset:
            raise serializers.ValidationError(
                {'subset_ids': ['Subset must contain the record\'s target.']}
            )
        for key in ('ref_tokens', 'text_tokens', 'target_tokens'):
            attrs[key] = tuple(attrs[key])
        attrs['subset_ids'] = None if subset is None else tuple(subset)
        return attrs
